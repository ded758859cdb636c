//! Multistart driver: independently seeded solves, deterministic
//! best-feasible selection.

use super::{solve_sqp, NlpError, NlpInstance, SolveReport, SolveStatus, SqpOptions};
use crate::exec::map_indexed;

/// Outcome digest of one start.
#[derive(Debug, Clone)]
pub struct StartSummary {
    pub seed: u64,
    pub status: SolveStatus,
    pub cost: f64,
    pub feasibility: f64,
    pub major_iterations: usize,
}

/// Best report plus the per-start digests (ordered by seed).
#[derive(Debug, Clone)]
pub struct MultistartReport {
    pub best: SolveReport,
    pub best_seed: u64,
    pub starts: Vec<StartSummary>,
}

fn is_feasible_outcome(report: &SolveReport) -> bool {
    matches!(
        report.status,
        SolveStatus::Optimal | SolveStatus::Feasible
    )
}

/// Run `k` independent solves on instances produced per seed `0..k`
/// (seed 0 conventionally being the unperturbed guess) and return the
/// feasible report with least cost; ties and infeasible aggregation are
/// deterministic in seed order. With `k = 1` this is exactly one
/// `solve_sqp` call on `generate(0)`.
pub fn multistart<F>(
    generate: F,
    k: usize,
    options: &SqpOptions,
) -> Result<MultistartReport, NlpError>
where
    F: Fn(u64) -> Result<NlpInstance, NlpError> + Sync + Send,
{
    assert!(k >= 1, "multistart requires at least one start");
    let reports: Vec<Result<SolveReport, NlpError>> =
        map_indexed(options.exec, k, |i| {
            generate(i as u64).map(|instance| solve_sqp(&instance, options))
        });

    let mut runs: Vec<(u64, SolveReport)> = Vec::with_capacity(k);
    for (i, report) in reports.into_iter().enumerate() {
        runs.push((i as u64, report?));
    }

    let starts: Vec<StartSummary> = runs
        .iter()
        .map(|(seed, r)| StartSummary {
            seed: *seed,
            status: r.status,
            cost: r.final_cost,
            feasibility: r.feasibility,
            major_iterations: r.major_iterations,
        })
        .collect();

    // Feasible runs compete on cost; otherwise fall back to the smallest
    // constraint violation. Strict `<` keeps the earliest seed on ties.
    let mut best_index = 0;
    for i in 1..runs.len() {
        let (cur, best) = (&runs[i].1, &runs[best_index].1);
        let better = match (is_feasible_outcome(cur), is_feasible_outcome(best)) {
            (true, true) => cur.final_cost < best.final_cost,
            (true, false) => true,
            (false, true) => false,
            (false, false) => cur.feasibility < best.feasibility,
        };
        if better {
            best_index = i;
        }
    }
    let (best_seed, best) = runs.swap_remove(best_index);
    Ok(MultistartReport {
        best,
        best_seed,
        starts,
    })
}
