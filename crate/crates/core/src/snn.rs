//! Discrete-time leaky integrate-and-fire network.
//!
//! Each bot carries a small, fully connected, non-recurrent network. One call
//! to [`step_network`] advances it by one time-step:
//!
//! 1. neurons that fired on the previous step are reset to zero potential;
//! 2. incoming charge `q_i = sum_j w_ij * A_j` is gathered from the previous
//!    step's spikes together with this step's externally triggered sensory
//!    neurons;
//! 3. potentials integrate with a fractional leak: `V <- V + q - beta * V`;
//! 4. a neuron fires when `V > V_th`, or spontaneously with probability `b`.
//!
//! Exactly one uniform draw per neuron is consumed on every step, in index
//! order, so a network's random stream advances identically regardless of
//! its activity.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{SimRng, UniformSource};

pub const DEFAULT_NEURONS: usize = 30;

/// Motor neurons occupy the first four slots.
pub const MOTOR_FORWARD: usize = 0;
pub const MOTOR_BACKWARD: usize = 1;
pub const MOTOR_CLOCKWISE: usize = 2;
pub const MOTOR_ANTICLOCKWISE: usize = 3;
pub const N_MOTOR: usize = 4;

/// Sensory neurons follow the motors: three radial bands, then three
/// angular thirds.
pub const SENSORY_START: usize = 4;
pub const N_SENSORY: usize = 6;

/// Smallest network that still has room for every motor and sensory neuron.
pub const MIN_NEURONS: usize = SENSORY_START + N_SENSORY;

#[derive(Debug, Error, PartialEq)]
pub enum SnnError {
    #[error("invalid network parameters: {0}")]
    InvalidParams(String),
    #[error("weight matrix needs {expected} entries for a {n}x{n} network, got {got}")]
    Dimension { n: usize, expected: usize, got: usize },
    #[error("weight matrix has non-zero self-connection w[{0}][{0}]")]
    SelfConnection(usize),
    #[error("weight matrix entry ({0}, {1}) is not finite")]
    NonFinite(usize, usize),
    #[error("network needs at least {MIN_NEURONS} neurons, got {0}")]
    TooSmall(usize),
}

/// Square synaptic weight matrix, row-major.
///
/// Row `i` is the receiving neuron and column `j` the sending neuron, so the
/// charge delivered to `i` is `sum_j w[i][j] * A[j]`. The diagonal is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights", into = "RawWeights")]
pub struct WeightMatrix {
    n: usize,
    data: Vec<f64>,
    /// Column-major mirror of `data` so a spike's fan-out is contiguous.
    cols: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawWeights {
    n: usize,
    w: Vec<f64>,
}

impl TryFrom<RawWeights> for WeightMatrix {
    type Error = SnnError;
    fn try_from(raw: RawWeights) -> Result<Self, SnnError> {
        WeightMatrix::from_row_major(raw.n, raw.w)
    }
}

impl From<WeightMatrix> for RawWeights {
    fn from(m: WeightMatrix) -> Self {
        RawWeights { n: m.n, w: m.data }
    }
}

impl WeightMatrix {
    pub fn zeros(n: usize) -> Self {
        WeightMatrix {
            n,
            data: vec![0.0; n * n],
            cols: vec![0.0; n * n],
        }
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self, SnnError> {
        if data.len() != n * n {
            return Err(SnnError::Dimension {
                n,
                expected: n * n,
                got: data.len(),
            });
        }
        let mut m = WeightMatrix {
            n,
            data,
            cols: vec![0.0; n * n],
        };
        m.sync_columns();
        m.validate()?;
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, SnnError> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(SnnError::Dimension {
                    n,
                    expected: n * n,
                    got: n * row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(n, data)
    }

    /// Off-diagonal entries drawn uniformly from `[lo, hi)` in row-major order.
    pub fn random_uniform(n: usize, lo: f64, hi: f64, rng: &mut SimRng) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m.data[i * n + j] = rng.uniform_in(lo, hi);
                }
            }
        }
        m.sync_columns();
        m
    }

    fn sync_columns(&mut self) {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                self.cols[j * n + i] = self.data[i * n + j];
            }
        }
    }

    fn validate(&self) -> Result<(), SnnError> {
        for i in 0..self.n {
            for j in 0..self.n {
                let w = self.data[i * self.n + j];
                if !w.is_finite() {
                    return Err(SnnError::NonFinite(i, j));
                }
                if i == j && w != 0.0 {
                    return Err(SnnError::SelfConnection(i));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets an off-diagonal weight. Panics on the diagonal.
    pub fn set(&mut self, i: usize, j: usize, w: f64) {
        assert!(i != j, "self-connections are fixed at zero");
        self.data[i * self.n + j] = w;
        self.cols[j * self.n + i] = w;
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Outgoing weights of sender `j`, indexed by receiver.
    pub fn column(&self, j: usize) -> &[f64] {
        &self.cols[j * self.n..(j + 1) * self.n]
    }

    /// Applies `f(i, j, &mut w_ij)` to every off-diagonal entry, row-major.
    pub fn for_each_off_diagonal(&mut self, mut f: impl FnMut(usize, usize, &mut f64)) {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    f(i, j, &mut self.data[i * n + j]);
                }
            }
        }
        self.sync_columns();
    }

    pub fn diagonal_is_zero(&self) -> bool {
        (0..self.n).all(|i| self.get(i, i) == 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SnnParams {
    pub n_neurons: usize,
    /// Firing threshold.
    pub v_th: f64,
    /// Fraction of the potential lost per step.
    pub beta: f64,
    /// Use the literal `r > b` spontaneous rule instead of `r < b`.
    pub spontaneous_inverted: bool,
}

impl Default for SnnParams {
    fn default() -> Self {
        SnnParams {
            n_neurons: DEFAULT_NEURONS,
            v_th: 0.4,
            beta: 0.01,
            spontaneous_inverted: false,
        }
    }
}

impl SnnParams {
    pub fn validate(&self) -> Result<(), SnnError> {
        if self.n_neurons < MIN_NEURONS {
            return Err(SnnError::TooSmall(self.n_neurons));
        }
        if !(self.v_th > 0.0 && self.v_th.is_finite()) {
            return Err(SnnError::InvalidParams(format!(
                "v_th must be positive, got {}",
                self.v_th
            )));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(SnnError::InvalidParams(format!(
                "beta must lie in [0, 1), got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Membrane potentials and the spikes emitted on the most recent step.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NeuronState {
    pub potentials: Vec<f64>,
    pub fired: Vec<bool>,
    #[serde(skip)]
    charge: Vec<f64>,
}

impl PartialEq for NeuronState {
    fn eq(&self, other: &Self) -> bool {
        self.potentials == other.potentials && self.fired == other.fired
    }
}

impl NeuronState {
    pub fn new(n: usize) -> Self {
        NeuronState {
            potentials: vec![0.0; n],
            fired: vec![false; n],
            charge: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.potentials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.potentials.is_empty()
    }

    pub fn spike_count(&self) -> usize {
        self.fired.iter().filter(|&&f| f).count()
    }
}

/// Advances the network by one step and returns the spikes it emitted.
///
/// `drive[j]` forces sensory neuron `j` to count as spiking for this step's
/// charge delivery; a triggered neuron's own potential is held at zero.
/// `spontaneous_rate` is the per-neuron firing probability `b`.
pub fn step_network<'s>(
    state: &'s mut NeuronState,
    weights: &WeightMatrix,
    spontaneous_rate: f64,
    params: &SnnParams,
    drive: &[bool],
    rng: &mut impl UniformSource,
) -> &'s [bool] {
    let n = weights.dim();
    debug_assert_eq!(state.len(), n);
    debug_assert_eq!(drive.len(), n);
    debug_assert!(drive
        .iter()
        .enumerate()
        .all(|(j, &d)| !d || (SENSORY_START..SENSORY_START + N_SENSORY).contains(&j)));
    if state.charge.len() != n {
        state.charge.resize(n, 0.0);
    }

    for (v, &fired) in state.potentials.iter_mut().zip(&state.fired) {
        if fired {
            *v = 0.0;
        }
    }

    state.charge.iter_mut().for_each(|q| *q = 0.0);
    for j in 0..n {
        if state.fired[j] || drive[j] {
            let col = weights.column(j);
            let charge = &mut state.charge[..col.len()];
            for k in 0..col.len() {
                charge[k] += col[k];
            }
        }
    }

    for ((v, &q), &d) in state.potentials.iter_mut().zip(&state.charge).zip(drive) {
        *v = if d { 0.0 } else { *v + q - params.beta * *v };
    }

    for i in 0..n {
        let r = rng.uniform();
        let spontaneous = if params.spontaneous_inverted {
            r > spontaneous_rate
        } else {
            r < spontaneous_rate
        };
        state.fired[i] = state.potentials[i] > params.v_th || spontaneous;
    }
    &state.fired
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::ScriptedUniform;

    fn quiet_rng() -> ScriptedUniform {
        // Never below any b in (0, 1), so spontaneous firing is off.
        ScriptedUniform::new(vec![0.999_999])
    }

    fn drive_sensory(n: usize, j: usize) -> Vec<bool> {
        let mut d = vec![false; n];
        d[j] = true;
        d
    }

    #[test]
    fn above_threshold_charge_fires_then_resets() {
        let mut w = WeightMatrix::zeros(30);
        w.set(12, 4, 0.5);
        let params = SnnParams::default();
        let mut s = NeuronState::new(30);
        let mut rng = quiet_rng();

        let fired = step_network(&mut s, &w, 0.0, &params, &drive_sensory(30, 4), &mut rng);
        assert!(fired[12]);
        assert_eq!(s.potentials[12], 0.5);

        let none = vec![false; 30];
        let fired = step_network(&mut s, &w, 0.0, &params, &none, &mut rng);
        assert!(!fired[12]);
        assert_eq!(s.potentials[12], 0.0);
    }

    #[test]
    fn sub_threshold_charge_decays() {
        let mut w = WeightMatrix::zeros(30);
        w.set(12, 4, 0.3);
        let params = SnnParams::default();
        let mut s = NeuronState::new(30);
        let mut rng = quiet_rng();
        step_network(&mut s, &w, 0.0, &params, &drive_sensory(30, 4), &mut rng);
        assert_eq!(s.potentials[12], 0.3);
        let none = vec![false; 30];
        step_network(&mut s, &w, 0.0, &params, &none, &mut rng);
        assert!((s.potentials[12] - 0.297).abs() < 1e-15);
        step_network(&mut s, &w, 0.0, &params, &none, &mut rng);
        assert!((s.potentials[12] - 0.29403).abs() < 1e-15);
        assert_eq!(s.spike_count(), 0);
    }

    #[test]
    fn zero_weights_stay_silent() {
        let w = WeightMatrix::zeros(30);
        let params = SnnParams::default();
        let mut s = NeuronState::new(30);
        let mut rng = SimRng::new(3, 9);
        let none = vec![false; 30];
        for _ in 0..1000 {
            let fired = step_network(&mut s, &w, 0.0, &params, &none, &mut rng);
            assert!(fired.iter().all(|f| !f));
        }
    }

    #[test]
    fn rate_one_fires_everything() {
        let mut w = WeightMatrix::zeros(30);
        w.set(0, 1, -5.0);
        let params = SnnParams::default();
        let mut s = NeuronState::new(30);
        let mut rng = SimRng::new(3, 9);
        let none = vec![false; 30];
        for _ in 0..100 {
            let fired = step_network(&mut s, &w, 1.0, &params, &none, &mut rng);
            assert!(fired.iter().all(|&f| f));
        }
    }

    #[test]
    fn consumes_one_draw_per_neuron() {
        let w = WeightMatrix::zeros(30);
        let params = SnnParams::default();
        let mut s = NeuronState::new(30);
        let mut rng = quiet_rng();
        let none = vec![false; 30];
        for _ in 0..5 {
            step_network(&mut s, &w, 0.01, &params, &none, &mut rng);
        }
        assert_eq!(rng.consumed(), 150);
    }

    #[test]
    fn triggered_sensory_potential_is_frozen() {
        let mut w = WeightMatrix::zeros(30);
        w.set(5, 20, 0.2);
        let params = SnnParams::default();
        let mut s = NeuronState::new(30);
        s.fired[20] = true;
        let mut rng = quiet_rng();
        step_network(&mut s, &w, 0.0, &params, &drive_sensory(30, 5), &mut rng);
        assert_eq!(s.potentials[5], 0.0);
        assert!(!s.fired[5]);
    }

    #[test]
    fn inverted_rule_fires_on_large_draws() {
        let w = WeightMatrix::zeros(30);
        let params = SnnParams {
            spontaneous_inverted: true,
            ..SnnParams::default()
        };
        let mut s = NeuronState::new(30);
        let mut rng = ScriptedUniform::new(vec![0.5]);
        let fired = step_network(&mut s, &w, 0.01, &params, &[false; 30], &mut rng);
        assert!(fired.iter().all(|&f| f));
    }

    #[test]
    fn rejects_bad_matrices_and_params() {
        assert!(matches!(
            WeightMatrix::from_row_major(3, vec![0.0; 8]),
            Err(SnnError::Dimension { .. })
        ));
        let mut d = vec![0.0; 9];
        d[4] = 1.0;
        assert_eq!(
            WeightMatrix::from_row_major(3, d),
            Err(SnnError::SelfConnection(1))
        );
        let mut d = vec![0.0; 9];
        d[1] = f64::NAN;
        assert_eq!(
            WeightMatrix::from_row_major(3, d),
            Err(SnnError::NonFinite(0, 1))
        );
        let bad = SnnParams {
            beta: 1.0,
            ..SnnParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = SnnParams {
            v_th: 0.0,
            ..SnnParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = SnnParams {
            n_neurons: 9,
            ..SnnParams::default()
        };
        assert_eq!(bad.validate(), Err(SnnError::TooSmall(9)));
    }

    #[test]
    fn weights_serde_round_trip() {
        let mut rng = SimRng::new(1, 0);
        let w = WeightMatrix::random_uniform(30, -0.5, 0.5, &mut rng);
        let s = serde_json::to_string(&w).unwrap();
        let back: WeightMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(w, back);
        assert!(serde_json::from_str::<WeightMatrix>(r#"{"n":2,"w":[1,0,0,0]}"#).is_err());
    }
}
