//! Central finite-difference verification of tape gradients.

use crate::error::{Error, Result};
use crate::numerics::{ParamStore, Tape, Var};

/// Relative errors below this denominator are measured absolutely, so that
/// entries which are zero up to rounding do not dominate.
pub const DENOMINATOR_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub entries: usize,
}

/// Compare the tape gradient of the scalar built by `build` against central
/// differences with step `step`, entry by entry over every parameter.
/// `build` must be deterministic in the store values (fixed dropout seeds,
/// targets held constant).
pub fn check_gradients<'g, F>(store: &mut ParamStore, step: f64, build: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<'g>, &ParamStore) -> Result<Var>,
{
    let eval = |store: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let loss = build(&mut tape, store)?;
        Ok(tape.value(loss).item())
    };
    {
        let mut tape = Tape::new();
        let loss = build(&mut tape, store)?;
        tape.backward(loss, store)?;
    }
    let analytic: Vec<Vec<f64>> = store.iter().map(|p| p.grad.as_slice().to_vec()).collect();
    let mut report = GradCheckReport { max_rel_err: 0.0, worst_param: String::new(), worst_index: 0, entries: 0 };
    let ids: Vec<_> = store.ids().collect();
    for (pi, id) in ids.into_iter().enumerate() {
        for e in 0..store.value(id).len() {
            let original = store.value(id).as_slice()[e];
            store.get_mut(id).value.as_mut_slice()[e] = original + step;
            let up = eval(store)?;
            store.get_mut(id).value.as_mut_slice()[e] = original - step;
            let down = eval(store)?;
            store.get_mut(id).value.as_mut_slice()[e] = original;
            let numeric = (up - down) / (2.0 * step);
            let a = analytic[pi][e];
            if !numeric.is_finite() || !a.is_finite() {
                return Err(Error::Numeric(format!("non-finite gradient entry {e} of {}", store.get(id).name)));
            }
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(DENOMINATOR_FLOOR);
            report.entries += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst_param = store.get(id).name.clone();
                report.worst_index = e;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{DenseMatrix, Parameter};

    #[test]
    fn detects_a_wrong_gradient() {
        let mut store = ParamStore::new();
        let id = store.add(Parameter::new("w", DenseMatrix::from_rows(&[[0.3, -1.2]])));
        // relu(w) summed is fine
        let ok = check_gradients(&mut store, 1e-5, |t, s| {
            let w = t.param(s, id);
            let r = t.relu(w);
            Ok(t.sum(r))
        })
        .unwrap();
        assert!(ok.max_rel_err < 1e-8);
        // a detached copy hides the dependence from the tape but not from the
        // finite differences
        let bad = check_gradients(&mut store, 1e-5, |t, s| {
            let w = t.param(s, id);
            let hidden = t.constant(t.value(w).clone());
            let sq = t.hadamard(hidden, hidden)?;
            let total = t.add(sq, w)?;
            Ok(t.sum(total))
        })
        .unwrap();
        assert!(bad.max_rel_err > 0.1);
    }
}
