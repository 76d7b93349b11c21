//! Layer forward passes: per-element loop form, tensor form, expansion
//! layers and the end-to-end network.
//!
//! The loop form spells out the per-(user, element) sums and serves as the
//! oracle; the tensor form computes each class in one pass over the tensor
//! and is what training and inference use. Both stack the four class outputs
//! along the feature axis in the fixed order cc, ca, oc, oa.

#![allow(clippy::needless_range_loop)]

use std::sync::Arc;

use crate::autodiff::{NodeId, Tape};
use crate::channel::FeatureTensor;

use super::params::{LayerKind, LayerSpec, NetworkParams, UnitParams};
use super::phase::PhaseConfiguration;
use super::{RisnetError, EXPANSION_UNITS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerMode {
    Loop,
    Tensor,
}

/// 1-based row-major index of the neighbor that expansion unit `j` fills
/// when applied at element `n`, on a grid with `h_cols` columns. Valid only
/// when all nine neighbors of `n` exist.
pub fn nu_index(n: usize, j: usize, h_cols: usize) -> Result<usize, RisnetError> {
    assert!((1..=9).contains(&j), "unit index must be in 1..=9");
    assert!(n >= 1, "element index is 1-based");
    let h = h_cols as isize;
    let n = n as isize;
    let j = j as isize;
    let nu = match j {
        1..=3 => n - h - 2 + j,
        4..=6 => n - 5 + j,
        _ => n + h - 8 + j,
    };
    // column wrap-around or leaving the top of the grid
    let col = (n - 1).rem_euclid(h);
    let col_offset = (j - 1).rem_euclid(3) - 1;
    if nu < 1 || col + col_offset < 0 || col + col_offset >= h {
        return Err(RisnetError::OutOfGrid {
            index: n as usize,
            rows: 0,
            cols: h_cols,
        });
    }
    Ok(nu as usize)
}

/// Placement maps of the nine expansion units: unit `j` (0-based here) sends
/// coarse cell `(r, c)` to fine cell `(3r + 1 + dr, 3c + 1 + dc)` on the
/// `3R x 3C` grid, with `(dr, dc)` the unit's offset in `{-1, 0, 1}^2`.
/// Together the maps cover every fine cell exactly once.
pub fn expansion_maps(coarse_rows: usize, coarse_cols: usize) -> Vec<Arc<Vec<usize>>> {
    let fine_cols = 3 * coarse_cols;
    (0..EXPANSION_UNITS)
        .map(|j| {
            let dr = (j / 3) as isize - 1;
            let dc = (j % 3) as isize - 1;
            let map: Vec<usize> = (0..coarse_rows * coarse_cols)
                .map(|cell| {
                    let r = (cell / coarse_cols) as isize;
                    let c = (cell % coarse_cols) as isize;
                    let fr = 3 * r + 1 + dr;
                    let fc = 3 * c + 1 + dc;
                    (fr * fine_cols as isize + fc) as usize
                })
                .collect();
            Arc::new(map)
        })
        .collect()
}

fn check_users(users: usize) -> Result<(), RisnetError> {
    if users < 2 {
        return Err(RisnetError::TooFewUsers { users });
    }
    Ok(())
}

fn check_input(input: &FeatureTensor, spec: &LayerSpec) -> Result<(), RisnetError> {
    if input.features() != spec.in_dim {
        return Err(RisnetError::FeatureMismatch(format!(
            "layer expects {} input features, tensor has {}",
            spec.in_dim,
            input.features()
        )));
    }
    Ok(())
}

/// One unit applied to the feature vector of (element, user):
/// `W f + b`, optionally rectified.
fn apply_unit(
    unit: &UnitParams<'_>,
    input: &FeatureTensor,
    element: usize,
    user: usize,
    rectify: bool,
    out: &mut [f64],
) {
    let q = unit.bias.numel();
    let p = input.features();
    let w = unit.weight.data();
    for (qi, slot) in out.iter_mut().enumerate().take(q) {
        let mut acc = unit.bias.data()[qi];
        for pi in 0..p {
            acc += w[qi * p + pi] * input.get(pi, element, user);
        }
        *slot = if rectify && acc < 0.0 { 0.0 } else { acc };
    }
}

/// Normal-layer forward in loop or tensor mode, producing the stacked
/// (4 out_dim, elements, users) tensor.
pub fn layer_forward(
    input: &FeatureTensor,
    params: &NetworkParams,
    layer: usize,
    mode: LayerMode,
) -> Result<FeatureTensor, RisnetError> {
    let spec = params.specs()[layer];
    assert_eq!(
        spec.kind,
        LayerKind::Normal,
        "layer_forward handles normal layers"
    );
    check_input(input, &spec)?;
    check_users(input.users())?;

    match mode {
        LayerMode::Loop => Ok(layer_forward_loop(input, params, layer, &spec)),
        LayerMode::Tensor => Ok(layer_forward_tensor(input, params, layer, &spec)),
    }
}

/// The per-(user, element) sums, written exactly as the class definitions
/// read.
fn layer_forward_loop(
    input: &FeatureTensor,
    params: &NetworkParams,
    layer: usize,
    spec: &LayerSpec,
) -> FeatureTensor {
    let n = input.elements();
    let users = input.users();
    let q = spec.out_dim;
    let mut out = FeatureTensor::zeros(4 * q, n, users);
    let mut scratch = vec![0.0f64; q];

    let classes: [UnitParams<'_>; 4] = [
        params.unit(layer, 0, 0),
        params.unit(layer, 1, 0),
        params.unit(layer, 2, 0),
        params.unit(layer, 3, 0),
    ];

    for element in 0..n {
        for user in 0..users {
            // cc: this user, this element
            apply_unit(&classes[0], input, element, user, true, &mut scratch);
            for qi in 0..q {
                out.set(qi, element, user, scratch[qi]);
            }
            // ca: this user, averaged over all elements
            let mut acc = vec![0.0f64; q];
            for other in 0..n {
                apply_unit(&classes[1], input, other, user, true, &mut scratch);
                for qi in 0..q {
                    acc[qi] += scratch[qi];
                }
            }
            for qi in 0..q {
                out.set(q + qi, element, user, acc[qi] / n as f64);
            }
            // oc: other users, this element
            let mut acc = vec![0.0f64; q];
            for other in 0..users {
                if other == user {
                    continue;
                }
                apply_unit(&classes[2], input, element, other, true, &mut scratch);
                for qi in 0..q {
                    acc[qi] += scratch[qi];
                }
            }
            for qi in 0..q {
                out.set(2 * q + qi, element, user, acc[qi] / (users - 1) as f64);
            }
            // oa: other users, averaged over all elements
            let mut acc = vec![0.0f64; q];
            for other_user in 0..users {
                if other_user == user {
                    continue;
                }
                for other in 0..n {
                    apply_unit(&classes[3], input, other, other_user, true, &mut scratch);
                    for qi in 0..q {
                        acc[qi] += scratch[qi];
                    }
                }
            }
            let denom = (n * (users - 1)) as f64;
            for qi in 0..q {
                out.set(3 * q + qi, element, user, acc[qi] / denom);
            }
        }
    }
    out
}

/// Rectified transform of every (element, user) pair for one unit, as a
/// (out_dim, elements, users) block.
fn transform_all(unit: &UnitParams<'_>, input: &FeatureTensor, rectify: bool) -> FeatureTensor {
    let q = unit.bias.numel();
    let p = input.features();
    let n = input.elements();
    let users = input.users();
    let mut out = FeatureTensor::zeros(q, n, users);
    let w = unit.weight.data();
    let pitch = n * users;
    for qi in 0..q {
        let bias = unit.bias.data()[qi];
        let mut row = vec![0.0f64; pitch];
        for pi in 0..p {
            let coeff = w[qi * p + pi];
            if coeff == 0.0 {
                continue;
            }
            let src = &input.data()[pi * pitch..(pi + 1) * pitch];
            for (d, s) in row.iter_mut().zip(src) {
                *d += coeff * s;
            }
        }
        let dst = &mut out.data_mut()[qi * pitch..(qi + 1) * pitch];
        for (slot, acc) in dst.iter_mut().zip(&row) {
            let v = acc + bias;
            *slot = if rectify && v < 0.0 { 0.0 } else { v };
        }
    }
    out
}

fn layer_forward_tensor(
    input: &FeatureTensor,
    params: &NetworkParams,
    layer: usize,
    spec: &LayerSpec,
) -> FeatureTensor {
    let n = input.elements();
    let users = input.users();
    let q = spec.out_dim;

    let t_cc = transform_all(&params.unit(layer, 0, 0), input, true);
    let t_ca = transform_all(&params.unit(layer, 1, 0), input, true);
    let t_oc = transform_all(&params.unit(layer, 2, 0), input, true);
    let t_oa = transform_all(&params.unit(layer, 3, 0), input, true);

    let mut out = FeatureTensor::zeros(4 * q, n, users);
    for qi in 0..q {
        // ca: mean over elements, replicated
        for user in 0..users {
            let mut acc = 0.0;
            for element in 0..n {
                acc += t_ca.get(qi, element, user);
            }
            let mean = acc / n as f64;
            for element in 0..n {
                out.set(q + qi, element, user, mean);
            }
        }
        // oc: all-user sum minus self
        for element in 0..n {
            let mut total = 0.0;
            for user in 0..users {
                total += t_oc.get(qi, element, user);
            }
            for user in 0..users {
                let v = (total - t_oc.get(qi, element, user)) / (users - 1) as f64;
                out.set(2 * q + qi, element, user, v);
            }
        }
        // oa: grand sum minus the per-user element sum
        let mut per_user = vec![0.0f64; users];
        for element in 0..n {
            for (user, slot) in per_user.iter_mut().enumerate() {
                *slot += t_oa.get(qi, element, user);
            }
        }
        let grand: f64 = per_user.iter().sum();
        let denom = (n * (users - 1)) as f64;
        for user in 0..users {
            let v = (grand - per_user[user]) / denom;
            for element in 0..n {
                out.set(3 * q + qi, element, user, v);
            }
        }
        // cc copies through
        for element in 0..n {
            for user in 0..users {
                out.set(qi, element, user, t_cc.get(qi, element, user));
            }
        }
    }
    out
}

/// Expansion-layer forward: nine per-class units each fill one offset of the
/// tripled grid.
pub fn expansion_forward(
    input: &FeatureTensor,
    params: &NetworkParams,
    layer: usize,
    coarse_rows: usize,
    coarse_cols: usize,
) -> Result<FeatureTensor, RisnetError> {
    let spec = params.specs()[layer];
    assert_eq!(spec.kind, LayerKind::Expansion);
    check_input(input, &spec)?;
    check_users(input.users())?;
    if input.elements() != coarse_rows * coarse_cols {
        return Err(RisnetError::FeatureMismatch(format!(
            "tensor has {} elements, grid is {coarse_rows}x{coarse_cols}",
            input.elements()
        )));
    }

    let n_coarse = input.elements();
    let users = input.users();
    let q = spec.out_dim;
    let fine = 9 * n_coarse;
    let maps = expansion_maps(coarse_rows, coarse_cols);

    let mut out = FeatureTensor::zeros(4 * q, fine, users);
    for (j, map) in maps.iter().enumerate() {
        // per-unit class outputs on the coarse grid
        let t_cc = transform_all(&params.unit(layer, 0, j), input, true);
        let t_ca = transform_all(&params.unit(layer, 1, j), input, true);
        let t_oc = transform_all(&params.unit(layer, 2, j), input, true);
        let t_oa = transform_all(&params.unit(layer, 3, j), input, true);

        for qi in 0..q {
            for user in 0..users {
                let mut ca_acc = 0.0;
                for element in 0..n_coarse {
                    ca_acc += t_ca.get(qi, element, user);
                }
                let ca = ca_acc / n_coarse as f64;
                for &target in map.iter() {
                    out.set(q + qi, target, user, ca);
                }
            }
            for element in 0..n_coarse {
                let mut total = 0.0;
                for user in 0..users {
                    total += t_oc.get(qi, element, user);
                }
                for user in 0..users {
                    let v = (total - t_oc.get(qi, element, user)) / (users - 1) as f64;
                    out.set(2 * q + qi, map[element], user, v);
                }
            }
            let mut per_user = vec![0.0f64; users];
            for element in 0..n_coarse {
                for (user, slot) in per_user.iter_mut().enumerate() {
                    *slot += t_oa.get(qi, element, user);
                }
            }
            let grand: f64 = per_user.iter().sum();
            let denom = (n_coarse * (users - 1)) as f64;
            for user in 0..users {
                let v = (grand - per_user[user]) / denom;
                for &target in map.iter() {
                    out.set(3 * q + qi, target, user, v);
                }
            }
            for (element, &target) in map.iter().enumerate() {
                for user in 0..users {
                    out.set(qi, target, user, t_cc.get(qi, element, user));
                }
            }
        }
    }
    Ok(out)
}

/// End-to-end forward: layer chain, final per-pair unit without activation,
/// then the sum over users as the phase vector.
pub fn forward(
    input: &FeatureTensor,
    params: &NetworkParams,
    input_grid: (usize, usize),
) -> Result<PhaseConfiguration, RisnetError> {
    let specs = params.specs().to_vec();
    let (mut rows, mut cols) = input_grid;
    if input.elements() != rows * cols {
        return Err(RisnetError::FeatureMismatch(format!(
            "tensor has {} elements, grid is {rows}x{cols}",
            input.elements()
        )));
    }
    let mut current = input.clone();
    for (layer, spec) in specs.iter().enumerate() {
        match spec.kind {
            LayerKind::Normal => {
                current = layer_forward(&current, params, layer, LayerMode::Tensor)?;
            }
            LayerKind::Expansion => {
                current = expansion_forward(&current, params, layer, rows, cols)?;
                rows *= 3;
                cols *= 3;
            }
            LayerKind::Final => {
                check_input(&current, spec)?;
                let unit = params.unit(layer, 0, 0);
                let n = current.elements();
                let users = current.users();
                let mut phases = vec![0.0f64; n];
                let mut scratch = vec![0.0f64; 1];
                for element in 0..n {
                    let mut sum = 0.0;
                    for user in 0..users {
                        apply_unit(&unit, &current, element, user, false, &mut scratch);
                        sum += scratch[0];
                    }
                    phases[element] = sum;
                }
                return PhaseConfiguration::new(phases);
            }
        }
    }
    unreachable!("validate_specs guarantees a final layer")
}

/// The same forward computation recorded on a tape. `param_nodes` must hold
/// the network tensors in canonical order (see [`NetworkParams::slot`]).
/// Returns the phase-vector node of shape `[N]`.
pub fn tape_forward(
    tape: &mut Tape,
    input: NodeId,
    param_nodes: &[NodeId],
    params: &NetworkParams,
    input_grid: (usize, usize),
) -> Result<NodeId, RisnetError> {
    let specs = params.specs().to_vec();
    let (mut rows, mut cols) = input_grid;
    let mut current = input;

    let unit_nodes = |params: &NetworkParams, layer: usize, class: usize, unit: usize| {
        let slot = params.slot(layer, class, unit);
        (param_nodes[slot], param_nodes[slot + 1])
    };

    // relu(W F + b) for one unit over the whole tensor
    let transform = |tape: &mut Tape,
                     current: NodeId,
                     weight: NodeId,
                     bias: NodeId,
                     rectify: bool|
     -> Result<NodeId, RisnetError> {
        let shape = tape.value(current).shape().to_vec();
        let (n, users) = (shape[1], shape[2]);
        let wf = tape.matmul(weight, current)?;
        let b1 = tape.broadcast_axis(bias, 1, n)?;
        let b2 = tape.broadcast_axis(b1, 2, users)?;
        let pre = tape.add(wf, b2)?;
        Ok(if rectify { tape.relu(pre)? } else { pre })
    };

    // the four class tensors of a normal-style layer on the current grid
    let class_outputs = |tape: &mut Tape,
                         current: NodeId,
                         layer: usize,
                         unit: usize,
                         params: &NetworkParams|
     -> Result<[NodeId; 4], RisnetError> {
        let shape = tape.value(current).shape().to_vec();
        let (n, users) = (shape[1], shape[2]);

        let (w_cc, b_cc) = unit_nodes(params, layer, 0, unit);
        let cc = transform(tape, current, w_cc, b_cc, true)?;

        let (w_ca, b_ca) = unit_nodes(params, layer, 1, unit);
        let t_ca = transform(tape, current, w_ca, b_ca, true)?;
        let ca_mean = tape.mean_axis(t_ca, 1)?;
        let ca = tape.broadcast_axis(ca_mean, 1, n)?;

        let (w_oc, b_oc) = unit_nodes(params, layer, 2, unit);
        let t_oc = transform(tape, current, w_oc, b_oc, true)?;
        let oc_total = tape.sum_axis(t_oc, 2)?;
        let oc_bcast = tape.broadcast_axis(oc_total, 2, users)?;
        let oc_diff = tape.sub(oc_bcast, t_oc)?;
        let oc = tape.scale(oc_diff, 1.0 / (users - 1) as f64)?;

        let (w_oa, b_oa) = unit_nodes(params, layer, 3, unit);
        let t_oa = transform(tape, current, w_oa, b_oa, true)?;
        let oa_user = tape.sum_axis(t_oa, 1)?; // [q, users]
        let oa_grand = tape.sum_axis(oa_user, 1)?; // [q]
        let oa_gb = tape.broadcast_axis(oa_grand, 1, users)?;
        let oa_diff = tape.sub(oa_gb, oa_user)?;
        let oa_scaled = tape.scale(oa_diff, 1.0 / (n * (users - 1)) as f64)?;
        let oa = tape.broadcast_axis(oa_scaled, 1, n)?;

        Ok([cc, ca, oc, oa])
    };

    for (layer, spec) in specs.iter().enumerate() {
        match spec.kind {
            LayerKind::Normal => {
                let classes = class_outputs(tape, current, layer, 0, params)?;
                current = tape.concat_feature(&classes)?;
            }
            LayerKind::Expansion => {
                let n_coarse = rows * cols;
                let fine = 9 * n_coarse;
                let maps = expansion_maps(rows, cols);
                let mut placed: Option<NodeId> = None;
                for (j, map) in maps.iter().enumerate() {
                    let classes = class_outputs(tape, current, layer, j, params)?;
                    let stacked = tape.concat_feature(&classes)?;
                    let scattered = tape.scatter_elements(stacked, Arc::clone(map), fine)?;
                    placed = Some(match placed {
                        Some(acc) => tape.add(acc, scattered)?,
                        None => scattered,
                    });
                }
                current = placed.expect("nine expansion units");
                rows *= 3;
                cols *= 3;
            }
            LayerKind::Final => {
                let (w, b) = unit_nodes(params, layer, 0, 0);
                let pre = transform(tape, current, w, b, false)?; // [1, n, users]
                let summed = tape.sum_axis(pre, 2)?; // [1, n]
                let phases = tape.sum_axis(summed, 0)?; // [n]
                return Ok(phases);
            }
        }
    }
    unreachable!("validate_specs guarantees a final layer")
}
