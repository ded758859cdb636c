//! Self-describing text dump of an NLP instance: dimensions, bounds,
//! initial point, and a sampled-residual table, so external solvers can
//! be wired up and sanity-checked offline without callbacks.

use std::io::Write;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{NlpError, NlpInstance};

const SAMPLE_COUNT: usize = 4;
const SAMPLE_SCALE: f64 = 1e-3;

fn write_vector(out: &mut impl Write, tag: &str, v: &DVector<f64>) -> std::io::Result<()> {
    write!(out, "{tag}")?;
    for value in v.iter() {
        // `{}` on f64 is the shortest representation that round-trips.
        write!(out, " {value}")?;
    }
    writeln!(out)
}

/// Serialize the instance plus residual samples at `x0` and a few
/// deterministic perturbations of it.
pub fn dump_instance(
    instance: &NlpInstance,
    out: &mut impl Write,
) -> Result<(), NlpError> {
    let io_err = |e: std::io::Error| NlpError::Eval {
        message: format!("dump write failed: {e}"),
    };
    writeln!(out, "nlp-dump v1").map_err(io_err)?;
    writeln!(out, "n {}", instance.n()).map_err(io_err)?;
    writeln!(out, "m {}", instance.m()).map_err(io_err)?;
    for i in 0..instance.n() {
        writeln!(
            out,
            "bound {i} {} {}",
            instance.lower()[i],
            instance.upper()[i]
        )
        .map_err(io_err)?;
    }
    write_vector(out, "x0", instance.x0()).map_err(io_err)?;

    let mut rng = ChaCha8Rng::seed_from_u64(0xD0);
    for sample in 0..=SAMPLE_COUNT {
        let x = if sample == 0 {
            instance.x0().clone()
        } else {
            let mut x = instance.x0().clone();
            for i in 0..x.len() {
                let delta = SAMPLE_SCALE * (1.0 + x[i].abs()) * rng.gen_range(-1.0..1.0);
                x[i] = (x[i] + delta).clamp(instance.lower()[i], instance.upper()[i]);
            }
            x
        };
        let f = instance.eval_objective(&x)?;
        let c = instance.eval_constraints(&x)?;
        writeln!(out, "sample {sample}").map_err(io_err)?;
        write_vector(out, "x", &x).map_err(io_err)?;
        writeln!(out, "f {f}").map_err(io_err)?;
        write_vector(out, "c", &c).map_err(io_err)?;
    }
    Ok(())
}
