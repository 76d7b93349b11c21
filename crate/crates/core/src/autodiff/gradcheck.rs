//! Central-difference validation of tape gradients.

use super::tape::{NodeId, Tape};
use super::tensor::Tensor;
use super::AutodiffError;

/// Compare reverse-mode gradients against central finite differences.
///
/// `build` records the scalar function of interest on a fresh tape given the
/// parameter leaves; it is invoked once per perturbed coordinate plus once
/// for the analytic pass. Returns the maximum relative error
/// `|a - n| / max(|a|, |n|, 1e-12)` over all coordinates.
pub fn gradcheck<F>(build: F, point: &[Tensor], step: f64) -> Result<f64, AutodiffError>
where
    F: Fn(&mut Tape, &[NodeId]) -> Result<NodeId, AutodiffError>,
{
    assert!(step > 0.0 && step <= 1e-3, "step must lie in (0, 1e-3]");

    let eval = |values: &[Tensor]| -> Result<(f64, Option<Vec<Tensor>>), AutodiffError> {
        let mut tape = Tape::new();
        let ids: Vec<NodeId> = values.iter().map(|t| tape.param(t.clone())).collect();
        let out = build(&mut tape, &ids)?;
        let value = tape.value(out);
        if value.numel() != 1 {
            return Err(AutodiffError::NonScalarOutput {
                shape: value.shape().to_vec(),
            });
        }
        Ok((value.item(), Some(tape.backward(out)?)))
    };

    let (_, grads) = eval(point)?;
    let analytic = grads.expect("analytic gradients");

    let mut max_rel = 0.0f64;
    let mut coordinate = 0usize;
    for (pi, p) in point.iter().enumerate() {
        for ci in 0..p.numel() {
            let mut plus = point.to_vec();
            plus[pi].data_mut()[ci] += step;
            let mut minus = point.to_vec();
            minus[pi].data_mut()[ci] -= step;

            let forward_only = |values: &[Tensor]| -> Result<f64, AutodiffError> {
                let mut tape = Tape::new();
                let ids: Vec<NodeId> = values.iter().map(|t| tape.param(t.clone())).collect();
                let out = build(&mut tape, &ids)?;
                Ok(tape.value(out).item())
            };
            let f_plus = forward_only(&plus)?;
            let f_minus = forward_only(&minus)?;
            if !f_plus.is_finite() || !f_minus.is_finite() {
                return Err(AutodiffError::NonFiniteEvaluation { coordinate });
            }

            let numeric = (f_plus - f_minus) / (2.0 * step);
            let a = analytic[pi].data()[ci];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-12);
            if rel > max_rel {
                max_rel = rel;
            }
            coordinate += 1;
        }
    }
    Ok(max_rel)
}
