use pmoc_cli::{run, RunConfig, SchemeChoice, SystemChoice};

fn show(tag: &str, report: &pmoc_cli::BenchmarkReport) {
    println!(
        "{tag}: status={} majors={:?} cost={:?} feas={:?} t_f={:?} params={:?} wall={:.1}s",
        report.record.status,
        report.record.major_iterations,
        report.record.cost,
        report.record.feasibility,
        report.record.t_f,
        report
            .record
            .design_params
            .iter()
            .map(|p| (p.name.clone(), p.value))
            .collect::<Vec<_>>(),
        report.record.wall_time_s
    );
    for start in &report.record.starts {
        println!(
            "  seed {}: {} cost {:.4e} feas {:.1e} majors {}",
            start.seed, start.status, start.cost, start.feasibility, start.major_iterations
        );
    }
}

#[test]
fn probe_acrobot_swing_up() {
    let mut config = RunConfig::default();
    config.system = SystemChoice::Acrobot;
    config.n = 64;
    config.tf_bounds = [1.0, 10.0];
    config.seeds = 8;
    show("acrobot-n64-seeds8", &run(&config));
}

#[test]
fn probe_threecrobot_lengths() {
    let mut config = RunConfig::default();
    config.system = SystemChoice::Threecrobot;
    config.n = 64;
    config.tf_bounds = [1.0, 10.0];
    config.optimize_lengths = true;
    config.seeds = 1;
    show("3crobot-n64-seeds1", &run(&config));
}

#[test]
fn probe_baselines_capped() {
    for scheme in [SchemeChoice::DaeEl, SchemeChoice::OdeEl] {
        let mut config = RunConfig::default();
        config.system = SystemChoice::Acrobot;
        config.scheme = scheme;
        config.n = 64;
        config.tf_bounds = [1.0, 10.0];
        config.tolerances.max_major = 300;
        show(&format!("acrobot-{}-cap300", config.scheme), &run(&config));
    }
}
