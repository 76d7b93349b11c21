//! The per-sample objective, both as a differentiable tape and as the plain
//! evaluation path.

use crate::autodiff::{NodeId, Tape, Tensor};
use crate::channel::{cascaded_channel, CascadeMode, ChannelSample, FeatureTensor};
use crate::linalg::ComplexMatrix;
use crate::precoding::{wmmse_precoder, wsr_objective, PrecodingMatrix, WmmseConfig};
use crate::risnet::{forward, tape_forward, NetworkParams, PhaseConfiguration};

use super::TrainingError;

fn matrix_parts(m: &ComplexMatrix) -> (Tensor, Tensor) {
    let shape = [m.rows(), m.cols()];
    let re = m.entries().iter().map(|z| z.re).collect();
    let im = m.entries().iter().map(|z| z.im).collect();
    (Tensor::from_vec(&shape, re), Tensor::from_vec(&shape, im))
}

/// Record the full per-sample objective on a tape: features through the
/// network, phases into the closed-form coupled channel, then the weighted
/// sum-rate against the fixed precoder. Returns the scalar objective node;
/// the parameter nodes are registered in canonical order.
pub fn sample_wsr_tape(
    tape: &mut Tape,
    sample: &ChannelSample,
    features: &FeatureTensor,
    precoder: &PrecodingMatrix,
    params: &NetworkParams,
    input_grid: (usize, usize),
) -> Result<NodeId, TrainingError> {
    let n = sample.ris_elements();
    let users = sample.users();

    let feature_node = tape.input(Tensor::from_vec(
        &[features.features(), features.elements(), features.users()],
        features.data().to_vec(),
    ));
    let param_nodes: Vec<NodeId> = params
        .tensors()
        .iter()
        .map(|t| tape.param(t.clone()))
        .collect();

    let phases = tape_forward(tape, feature_node, &param_nodes, params, input_grid)?;
    let cos_phase = tape.cos(phases)?;
    let sin_phase = tape.sin(phases)?;

    // row-scale helper: diag(exp(j phi)) * M for a constant complex matrix
    let row_scale =
        |tape: &mut Tape, matrix: &ComplexMatrix| -> Result<(NodeId, NodeId), TrainingError> {
            let cols = matrix.cols();
            let (re_const, im_const) = matrix_parts(matrix);
            let m_re = tape.input(re_const);
            let m_im = tape.input(im_const);
            let cos_b = tape.broadcast_axis(cos_phase, 1, cols)?;
            let sin_b = tape.broadcast_axis(sin_phase, 1, cols)?;
            let rr = tape.mul(cos_b, m_re)?;
            let ii = tape.mul(sin_b, m_im)?;
            let ri = tape.mul(cos_b, m_im)?;
            let ir = tape.mul(sin_b, m_re)?;
            Ok((tape.sub(rr, ii)?, tape.add(ri, ir)?))
        };

    let (phi_h_re, phi_h_im) = row_scale(tape, &sample.h)?;
    let (phi_s_re, phi_s_im) = row_scale(tape, &sample.s_ii)?;

    // A = I - Phi S_II
    let identity = tape.input(Tensor::from_vec(
        &[n, n],
        (0..n * n)
            .map(|i| if i % (n + 1) == 0 { 1.0 } else { 0.0 })
            .collect(),
    ));
    let a_re = tape.sub(identity, phi_s_re)?;
    let a_im = tape.scale(phi_s_im, -1.0)?;

    let (g_re_const, g_im_const) = matrix_parts(&sample.g);
    let g_re = tape.input(g_re_const);
    let g_im = tape.input(g_im_const);
    let (x_re, x_im) = tape.complex_solve_right((a_re, a_im), (g_re, g_im))?;

    let (xh_re, xh_im) = tape.complex_matmul((x_re, x_im), (phi_h_re, phi_h_im))?;
    let (d_re_const, d_im_const) = matrix_parts(&sample.d);
    let d_re = tape.input(d_re_const);
    let d_im = tape.input(d_im_const);
    let c_re = tape.add(d_re, xh_re)?;
    let c_im = tape.add(d_im, xh_im)?;

    let (v_re_const, v_im_const) = matrix_parts(&precoder.v);
    let v_re = tape.input(v_re_const);
    let v_im = tape.input(v_im_const);
    let (l_re, l_im) = tape.complex_matmul((c_re, c_im), (v_re, v_im))?;
    let link_power = tape.magnitude_squared(l_re, l_im)?; // [U, U]

    let eye_mask = tape.input(Tensor::from_vec(
        &[users, users],
        (0..users * users)
            .map(|i| if i % (users + 1) == 0 { 1.0 } else { 0.0 })
            .collect(),
    ));
    let masked = tape.mul(link_power, eye_mask)?;
    let signal = tape.sum_axis(masked, 1)?; // [U]
    let row_total = tape.sum_axis(link_power, 1)?; // [U]
    let interference = tape.sub(row_total, signal)?;
    let noise = tape.input(Tensor::filled(&[users], sample.noise_power));
    let denom = tape.add(interference, noise)?;
    let inv_denom = tape.recip(denom)?;
    let sinr = tape.mul(signal, inv_denom)?;
    let ones = tape.input(Tensor::filled(&[users], 1.0));
    let one_plus = tape.add(ones, sinr)?;
    let log_term = tape.log(one_plus)?;
    let rates = tape.scale(log_term, 1.0 / std::f64::consts::LN_2)?;
    let weights = tape.input(Tensor::from_vec(&[users], sample.weights.clone()));
    let weighted = tape.mul(weights, rates)?;
    Ok(tape.sum_axis(weighted, 0)?)
}

/// Result of evaluating one sample with the current network.
#[derive(Debug, Clone)]
pub struct SampleEvaluation {
    pub wsr: f64,
    pub phases: PhaseConfiguration,
    pub precoder: PrecodingMatrix,
    pub channel: ComplexMatrix,
}

/// Plain evaluation path: network phases, closed-form channel, fresh WMMSE
/// precoder, weighted sum-rate.
pub fn evaluate_sample(
    sample: &ChannelSample,
    features: &FeatureTensor,
    params: &NetworkParams,
    input_grid: (usize, usize),
    wmmse_cfg: &WmmseConfig,
) -> Result<SampleEvaluation, TrainingError> {
    let phases = forward(features, params, input_grid)?;
    let channel = cascaded_channel(sample, &phases, CascadeMode::ClosedForm)?;
    let outcome = wmmse_precoder(
        &channel,
        &sample.weights,
        sample.noise_power,
        sample.power_budget,
        wmmse_cfg,
    )?;
    let wsr = wsr_objective(
        &channel,
        &outcome.precoder,
        sample.noise_power,
        &sample.weights,
    )?;
    Ok(SampleEvaluation {
        wsr,
        phases,
        precoder: outcome.precoder,
        channel,
    })
}

/// Forward value of the tape objective for a fixed precoder, used to check
/// training/evaluation consistency.
pub fn tape_objective_value(
    sample: &ChannelSample,
    features: &FeatureTensor,
    precoder: &PrecodingMatrix,
    params: &NetworkParams,
    input_grid: (usize, usize),
) -> Result<f64, TrainingError> {
    let mut tape = Tape::new();
    let node = sample_wsr_tape(&mut tape, sample, features, precoder, params, input_grid)?;
    Ok(tape.value(node).item())
}

/// The same quantity computed without the tape.
pub fn direct_objective_value(
    sample: &ChannelSample,
    features: &FeatureTensor,
    precoder: &PrecodingMatrix,
    params: &NetworkParams,
    input_grid: (usize, usize),
) -> Result<f64, TrainingError> {
    let phases = forward(features, params, input_grid)?;
    let channel = cascaded_channel(sample, &phases, CascadeMode::ClosedForm)?;
    Ok(wsr_objective(
        &channel,
        precoder,
        sample.noise_power,
        &sample.weights,
    )?)
}
