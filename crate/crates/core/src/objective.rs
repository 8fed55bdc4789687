//! Requirements cost, L1-regularized total loss and the box-constraint
//! elimination transform that lets an unconstrained minimizer drive bounded
//! parameters and switches.

use serde::{Deserialize, Serialize};

use crate::model::{DesignModel, EdgeState, Mode, ParamBounds};
use crate::sim::{transient, SimConfig, SimError, Waveform};

#[derive(Debug, thiserror::Error)]
pub enum ObjectiveError {
    #[error("waveforms do not overlap in time")]
    EmptyOverlap,
    #[error("invalid interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
    #[error("value {x} outside [{a}, {b}]")]
    OutOfRange { x: f64, a: f64, b: f64 },
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Decomposed loss of one evaluation: total = requirements + lambda * sparsity.
///
/// An infeasible or numerically failed simulation is reported as the +inf
/// sentinel in `requirements` and `total`, ranking worst everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossValue {
    pub requirements: f64,
    /// Sum of all switch values (parameters excluded).
    pub sparsity: f64,
    pub lambda: f64,
    pub total: f64,
}

impl LossValue {
    pub fn infeasible(sparsity: f64, lambda: f64) -> LossValue {
        LossValue {
            requirements: f64::INFINITY,
            sparsity,
            lambda,
            total: f64::INFINITY,
        }
    }
}

fn same_grid(a: &Waveform, b: &Waveform) -> bool {
    a.t0 == b.t0 && a.dt == b.dt && a.samples.len() == b.samples.len()
}

/// Mean squared error between the predicted and target load voltage.
///
/// When the grids differ, the target is resampled onto the predicted grid by
/// linear interpolation and the error is taken over the overlap window.
pub fn requirements_cost(predicted: &Waveform, target: &Waveform) -> Result<f64, ObjectiveError> {
    if same_grid(predicted, target) {
        let n = predicted.samples.len() as f64;
        return Ok(predicted
            .samples
            .iter()
            .zip(&target.samples)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / n);
    }
    let start = predicted.t0.max(target.t0);
    let end = predicted.end_time().min(target.end_time());
    if end < start {
        return Err(ObjectiveError::EmptyOverlap);
    }
    let slack = 1e-9 * predicted.dt;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (k, p) in predicted.samples.iter().enumerate() {
        let t = predicted.t0 + k as f64 * predicted.dt;
        if t + slack < start || t - slack > end {
            continue;
        }
        let diff = p - target.value_at(t);
        sum += diff * diff;
        count += 1;
    }
    if count == 0 {
        return Err(ObjectiveError::EmptyOverlap);
    }
    Ok(sum / count as f64)
}

/// Simulate the model and combine the requirements cost with the L1 switch
/// penalty. Simulation failures become the +inf sentinel.
pub fn total_loss(
    model: &DesignModel,
    target: &Waveform,
    lambda: f64,
    cfg: &SimConfig,
) -> Result<LossValue, ObjectiveError> {
    debug_assert!(lambda >= 0.0);
    let sparsity = model.switch_sum();
    let predicted = match transient(model, cfg) {
        Ok(w) => w,
        Err(SimError::Singular { .. })
        | Err(SimError::NonFinite { .. })
        | Err(SimError::KclViolation { .. }) => {
            return Ok(LossValue::infeasible(sparsity, lambda));
        }
        Err(e) => return Err(e.into()),
    };
    let requirements = requirements_cost(&predicted, target)?;
    Ok(LossValue {
        requirements,
        sparsity,
        lambda,
        total: requirements + lambda * sparsity,
    })
}

/// Map an unconstrained variable into [a, b] via x = a + (sin(x~)+1)(b-a)/2.
/// The image is clamped against rounding so it never escapes the interval.
pub fn box_transform(x_tilde: f64, a: f64, b: f64) -> Result<f64, ObjectiveError> {
    if !(a < b) {
        return Err(ObjectiveError::InvalidInterval { a, b });
    }
    Ok((a + (x_tilde.sin() + 1.0) * 0.5 * (b - a)).clamp(a, b))
}

/// Principal-branch inverse of [`box_transform`].
pub fn inverse_box_transform(x: f64, a: f64, b: f64) -> Result<f64, ObjectiveError> {
    if !(a < b) {
        return Err(ObjectiveError::InvalidInterval { a, b });
    }
    if x < a || x > b {
        return Err(ObjectiveError::OutOfRange { x, a, b });
    }
    let u = ((x - a) / (b - a) * 2.0 - 1.0).clamp(-1.0, 1.0);
    Ok(u.asin())
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarKind {
    /// Component parameter, searched in log space inside its box.
    LogParam { ln_lo: f64, ln_hi: f64 },
    /// Switch value in [0, 1].
    Switch,
}

/// Per-variable transform between the optimizer's unconstrained space and
/// the physical vector accepted by [`DesignModel::unpack_variables`].
///
/// Parameters span decades, so their boxes are applied to the logarithm of
/// the value before exponentiating back.
#[derive(Debug, Clone)]
pub struct TransformLayout {
    kinds: Vec<VarKind>,
}

impl TransformLayout {
    /// Walks the model's variables in packing order.
    pub fn for_model(model: &DesignModel, bounds: &ParamBounds) -> TransformLayout {
        let mut kinds = Vec::with_capacity(model.variable_count());
        let log_param = |(lo, hi): (f64, f64)| VarKind::LogParam {
            ln_lo: lo.ln(),
            ln_hi: hi.ln(),
        };
        for state in model.edge_states.values() {
            match state {
                EdgeState::Relaxed(edge) => {
                    for (branch, b) in [
                        (&edge.resistor, bounds.resistance),
                        (&edge.inductor, bounds.inductance),
                        (&edge.capacitor, bounds.capacitance),
                    ] {
                        if branch.is_some() {
                            kinds.push(log_param(b));
                            kinds.push(VarKind::Switch);
                        }
                    }
                    if edge.short.is_some() {
                        kinds.push(VarKind::Switch);
                    }
                }
                EdgeState::Mode(mode) => match mode {
                    Mode::Resistor(_) => kinds.push(log_param(bounds.resistance)),
                    Mode::Inductor(_) => kinds.push(log_param(bounds.inductance)),
                    Mode::Capacitor(_) => kinds.push(log_param(bounds.capacitance)),
                    Mode::Open | Mode::Short => {}
                },
            }
        }
        TransformLayout { kinds }
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    /// Unconstrained -> physical. Infallible: the layout was validated on
    /// construction and the box image is clamped.
    pub fn to_physical(&self, unconstrained: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(unconstrained.len(), self.kinds.len());
        out.clear();
        out.extend(self.kinds.iter().zip(unconstrained).map(|(kind, &x)| {
            match *kind {
                VarKind::LogParam { ln_lo, ln_hi } => {
                    let ln_v = ln_lo + (x.sin() + 1.0) * 0.5 * (ln_hi - ln_lo);
                    ln_v.clamp(ln_lo, ln_hi).exp()
                }
                VarKind::Switch => ((x.sin() + 1.0) * 0.5).clamp(0.0, 1.0),
            }
        }));
    }

    /// Physical -> unconstrained; values are clamped into their boxes first
    /// to absorb rounding from round trips.
    pub fn to_unconstrained(&self, physical: &[f64]) -> Vec<f64> {
        debug_assert_eq!(physical.len(), self.kinds.len());
        self.kinds
            .iter()
            .zip(physical)
            .map(|(kind, &v)| match *kind {
                VarKind::LogParam { ln_lo, ln_hi } => {
                    let ln_v = v.ln().clamp(ln_lo, ln_hi);
                    let u = ((ln_v - ln_lo) / (ln_hi - ln_lo) * 2.0 - 1.0).clamp(-1.0, 1.0);
                    u.asin()
                }
                VarKind::Switch => (v.clamp(0.0, 1.0) * 2.0 - 1.0).asin(),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_grid, DesignModel, SourceSpec, DEFAULT_EPSILON};
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn wave(samples: Vec<f64>) -> Waveform {
        Waveform::new(0.0, 1.0, samples).unwrap()
    }

    #[test]
    fn mse_examples() {
        let a = wave(vec![0.5, 1.0, 0.25]);
        assert_eq!(requirements_cost(&a, &a).unwrap(), 0.0);

        let b = wave(vec![1.5, 2.0, 1.25]);
        assert_eq!(requirements_cost(&a, &b).unwrap(), 1.0);

        let p = wave(vec![0.0, 1.0]);
        let t = wave(vec![1.0, 1.0]);
        assert_eq!(requirements_cost(&p, &t).unwrap(), 0.5);
    }

    #[test]
    fn mse_resamples_target() {
        // Target at half the rate, linear between samples: interpolation is
        // exact for a linear ramp.
        let p = Waveform::new(0.0, 0.5, vec![0.0, 0.5, 1.0, 1.5, 2.0]).unwrap();
        let t = Waveform::new(0.0, 1.0, vec![0.0, 1.0, 2.0]).unwrap();
        assert!(requirements_cost(&p, &t).unwrap() < 1e-30);
    }

    #[test]
    fn mse_rejects_empty_overlap() {
        let p = Waveform::new(0.0, 1.0, vec![0.0, 1.0]).unwrap();
        let t = Waveform::new(10.0, 1.0, vec![0.0, 1.0]).unwrap();
        assert!(matches!(
            requirements_cost(&p, &t),
            Err(ObjectiveError::EmptyOverlap)
        ));
    }

    #[test]
    fn mse_symmetric_on_shared_grid() {
        let a = wave(vec![0.0, 0.3, 1.0, -0.2]);
        let b = wave(vec![0.1, 0.0, 0.9, 0.4]);
        assert_eq!(
            requirements_cost(&a, &b).unwrap(),
            requirements_cost(&b, &a).unwrap()
        );
    }

    #[test]
    fn box_transform_examples() {
        assert_eq!(box_transform(-FRAC_PI_2, 2.0, 6.0).unwrap(), 2.0);
        assert_eq!(box_transform(FRAC_PI_2, 2.0, 6.0).unwrap(), 6.0);
        assert_eq!(box_transform(0.0, 2.0, 6.0).unwrap(), 4.0);
        assert!(box_transform(0.0, 6.0, 2.0).is_err());
        assert!(box_transform(0.0, 2.0, 2.0).is_err());
    }

    #[test]
    fn inverse_box_examples() {
        assert_eq!(inverse_box_transform(4.0, 2.0, 6.0).unwrap(), 0.0);
        assert_eq!(inverse_box_transform(2.0, 2.0, 6.0).unwrap(), -FRAC_PI_2);
        assert!(inverse_box_transform(7.0, 2.0, 6.0).is_err());
    }

    #[test]
    fn total_loss_identities() {
        let target = wave(vec![0.0, 0.0, 0.0]);
        let model = DesignModel::relaxed_init(
            generate_grid(1, 2).unwrap(),
            SourceSpec::Step { amplitude: 1.0 },
            1.0,
            DEFAULT_EPSILON,
            3,
            &crate::model::ParamBounds::default(),
        );
        let cfg = SimConfig::new(1e-3, 1e-5);
        let l0 = total_loss(&model, &target, 0.0, &cfg).unwrap();
        assert_eq!(l0.total, l0.requirements);
        // One full edge at switches 0.5: sparsity = 2.
        assert_eq!(l0.sparsity, 2.0);
        let l2 = total_loss(&model, &target, 2.0, &cfg).unwrap();
        assert_eq!(l2.total, l2.requirements + 2.0 * 2.0);
    }

    #[test]
    fn infeasible_model_yields_sentinel() {
        let topo = generate_grid(2, 2).unwrap();
        let states = topo
            .edges
            .iter()
            .map(|e| (e.id, crate::model::EdgeState::Mode(Mode::Open)))
            .collect();
        let mut model = DesignModel::new(
            topo,
            states,
            SourceSpec::Step { amplitude: 1.0 },
            1.0,
            DEFAULT_EPSILON,
        )
        .unwrap();
        // Make the matrix genuinely singular: float an island.
        model.edge_states.insert(0, crate::model::EdgeState::Mode(Mode::Resistor(1.0)));
        let target = wave(vec![0.0, 0.0]);
        let loss = total_loss(&model, &target, 1.0, &SimConfig::new(1e-3, 1e-5)).unwrap();
        assert!(loss.total.is_infinite());
    }

    #[test]
    fn layout_round_trip() {
        let model = DesignModel::relaxed_init(
            generate_grid(2, 2).unwrap(),
            SourceSpec::Step { amplitude: 1.0 },
            1.0,
            DEFAULT_EPSILON,
            11,
            &crate::model::ParamBounds::default(),
        );
        let bounds = crate::model::ParamBounds::default();
        let layout = TransformLayout::for_model(&model, &bounds);
        assert_eq!(layout.len(), model.variable_count());
        let physical = model.pack_variables();
        let x = layout.to_unconstrained(&physical);
        let mut back = Vec::new();
        layout.to_physical(&x, &mut back);
        for (p, q) in physical.iter().zip(&back) {
            assert!((p - q).abs() <= 1e-9 * p.abs().max(1.0), "{p} vs {q}");
        }
    }

    proptest! {
        #[test]
        fn box_image_stays_inside(x in proptest::num::f64::NORMAL, a in -1e6f64..1e6, w in 1e-9f64..1e9) {
            let b = a + w;
            prop_assume!(a < b);
            let y = box_transform(x, a, b).unwrap();
            prop_assert!(y >= a && y <= b);
        }

        #[test]
        fn inverse_round_trip(u in 0.0f64..1.0) {
            let (a, b) = (0.25f64, 17.5f64);
            let x = a + u * (b - a);
            let xt = inverse_box_transform(x, a, b).unwrap();
            let back = box_transform(xt, a, b).unwrap();
            prop_assert!((back - x).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }
}
