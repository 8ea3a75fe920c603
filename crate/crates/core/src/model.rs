//! Network description and closed-form rate computations for the K-user
//! MISO interference channel with interference treated as noise.
//!
//! Cells are indexed from 0. The channel `h_jk` from base station `j` to the
//! mobile in cell `k` is stored as a column vector of length `M_j`, so the
//! received signal power caused by covariance `S_j` is `h_jk^H S_j h_jk`.
//! Rates are in bits per channel use.

use crate::linalg::{self, gain, quad_form};
use crate::{CMatrix, CVector, Error, Result, C64};

/// Relative PSD tolerance on covariance eigenvalues, scaled by `trace(S)`.
pub const PSD_TOL_REL: f64 = 1e-9;
/// Relative feasibility tolerance on power and IT constraints.
pub const FEAS_TOL_REL: f64 = 1e-7;

/// All channels, power budgets and noise powers of a K-cell network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkInstance {
    antennas: Vec<usize>,
    power: Vec<f64>,
    noise: Vec<f64>,
    /// `channels[from][to]`, length `antennas[from]`.
    channels: Vec<Vec<CVector>>,
}

impl NetworkInstance {
    /// Builds a network, checking that every channel `channels[j][k]` has
    /// `antennas[j]` entries and that power budgets and noise powers are
    /// strictly positive.
    pub fn new(antennas: Vec<usize>, power: Vec<f64>, noise: Vec<f64>, channels: Vec<Vec<CVector>>) -> Result<Self> {
        let k = antennas.len();
        if k == 0 {
            return Err(Error::Dimension("network needs at least one cell".into()));
        }
        if power.len() != k || noise.len() != k {
            return Err(Error::Dimension(format!(
                "{} cells but {} power budgets and {} noise powers",
                k,
                power.len(),
                noise.len()
            )));
        }
        if let Some(c) = antennas.iter().position(|&m| m == 0) {
            return Err(Error::Dimension(format!("cell {c} has zero antennas")));
        }
        for (c, (&p, &s)) in power.iter().zip(&noise).enumerate() {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::Usage(format!("power budget of cell {c} must be positive, got {p}")));
            }
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Usage(format!("noise power of cell {c} must be positive, got {s}")));
            }
        }
        if channels.len() != k || channels.iter().any(|row| row.len() != k) {
            return Err(Error::Dimension(format!("expected {k}x{k} channel entries")));
        }
        for (j, row) in channels.iter().enumerate() {
            for (to, h) in row.iter().enumerate() {
                if h.len() != antennas[j] {
                    return Err(Error::Dimension(format!(
                        "channel from {j} to {to} has length {}, expected {}",
                        h.len(),
                        antennas[j]
                    )));
                }
                if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::Usage(format!("channel from {j} to {to} is not finite")));
                }
            }
        }
        Ok(Self { antennas, power, noise, channels })
    }

    pub fn cells(&self) -> usize {
        self.antennas.len()
    }

    pub fn antennas(&self, k: usize) -> usize {
        self.antennas[k]
    }

    pub fn power(&self, k: usize) -> f64 {
        self.power[k]
    }

    pub fn noise(&self, k: usize) -> f64 {
        self.noise[k]
    }

    /// Channel `h_{from,to}`.
    pub fn channel(&self, from: usize, to: usize) -> &CVector {
        &self.channels[from][to]
    }

    pub(crate) fn check_cell(&self, k: usize) -> Result<()> {
        if k >= self.cells() {
            return Err(Error::Usage(format!("cell index {k} out of range for {} cells", self.cells())));
        }
        Ok(())
    }
}

/// Per-cell transmit covariances, optionally with the beamformers that
/// generated them (`S_k = w_k w_k^H`).
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitState {
    covariances: Vec<CMatrix>,
    beamformers: Option<Vec<CVector>>,
}

impl TransmitState {
    pub fn from_beamformers(beamformers: Vec<CVector>) -> Self {
        let covariances = beamformers.iter().map(linalg::outer).collect();
        Self { covariances, beamformers: Some(beamformers) }
    }

    pub fn from_covariances(covariances: Vec<CMatrix>) -> Self {
        Self { covariances, beamformers: None }
    }

    pub fn covariance(&self, k: usize) -> &CMatrix {
        &self.covariances[k]
    }

    pub fn covariances(&self) -> &[CMatrix] {
        &self.covariances
    }

    pub fn beamformers(&self) -> Option<&[CVector]> {
        self.beamformers.as_deref()
    }

    pub fn cells(&self) -> usize {
        self.covariances.len()
    }

    /// Structural check against `net`: one square covariance of size `M_k`
    /// per cell.
    pub fn check_dimensions(&self, net: &NetworkInstance) -> Result<()> {
        if self.cells() != net.cells() {
            return Err(Error::Dimension(format!("state has {} cells, network has {}", self.cells(), net.cells())));
        }
        for (k, s) in self.covariances.iter().enumerate() {
            let m = net.antennas(k);
            if s.nrows() != m || s.ncols() != m {
                return Err(Error::Dimension(format!(
                    "covariance of cell {k} is {}x{}, expected {m}x{m}",
                    s.nrows(),
                    s.ncols()
                )));
            }
        }
        Ok(())
    }

    /// Full validity: dimensions, Hermitian PSD within `PSD_TOL_REL * trace`,
    /// and `trace(S_k) <= P_k (1 + FEAS_TOL_REL)`.
    pub fn validate(&self, net: &NetworkInstance) -> Result<()> {
        self.check_dimensions(net)?;
        for (k, s) in self.covariances.iter().enumerate() {
            if !linalg::is_hermitian(s, 1e-12) {
                return Err(Error::Usage(format!("covariance of cell {k} is not Hermitian")));
            }
            let tr = linalg::trace_re(s);
            let (vals, _) = linalg::hermitian_eigen(s);
            if vals[0] < -PSD_TOL_REL * tr.abs().max(f64::MIN_POSITIVE) {
                return Err(Error::Usage(format!("covariance of cell {k} has negative eigenvalue {}", vals[0])));
            }
            if tr > net.power(k) * (1.0 + FEAS_TOL_REL) {
                return Err(Error::Usage(format!(
                    "covariance of cell {k} uses power {tr} above budget {}",
                    net.power(k)
                )));
            }
        }
        Ok(())
    }
}

/// Rates of all K users in bits per channel use.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTuple(Vec<f64>);

impl RateTuple {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if let Some(r) = rates.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::Usage(format!("rates must be finite and non-negative, got {r}")));
        }
        Ok(Self(rates))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for RateTuple {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Index<usize> for RateTuple {
    type Output = f64;

    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

/// Interference power `h_{from,to}^H S h_{from,to}` caused at mobile `to` by
/// covariance `s` at base station `from`.
pub fn interference_level(from: usize, to: usize, s: &CMatrix, net: &NetworkInstance) -> Result<f64> {
    net.check_cell(from)?;
    net.check_cell(to)?;
    if from == to {
        return Err(Error::Usage(format!("interference level needs distinct cells, got {from} twice")));
    }
    let m = net.antennas(from);
    if s.nrows() != m || s.ncols() != m {
        return Err(Error::Dimension(format!("covariance is {}x{}, expected {m}x{m}", s.nrows(), s.ncols())));
    }
    Ok(quad_form(net.channel(from, to), s).max(0.0))
}

/// Received signal power and interference-plus-noise at mobile `k`.
fn signal_and_disturbance(k: usize, state: &TransmitState, net: &NetworkInstance) -> Result<(f64, f64)> {
    net.check_cell(k)?;
    state.check_dimensions(net)?;
    let signal = quad_form(net.channel(k, k), state.covariance(k)).max(0.0);
    let interference: f64 =
        (0..net.cells()).filter(|&j| j != k).map(|j| quad_form(net.channel(j, k), state.covariance(j)).max(0.0)).sum();
    Ok((signal, interference + net.noise(k)))
}

/// Receiver SINR of user `k`.
pub fn sinr(k: usize, state: &TransmitState, net: &NetworkInstance) -> Result<f64> {
    let (signal, disturbance) = signal_and_disturbance(k, state, net)?;
    Ok(signal / disturbance)
}

/// `log2(1 + SINR_k)`.
pub fn achievable_rate(k: usize, state: &TransmitState, net: &NetworkInstance) -> Result<f64> {
    Ok(sinr(k, state, net)?.ln_1p() / std::f64::consts::LN_2)
}

/// Rates of every user under `state`.
pub fn rate_tuple(state: &TransmitState, net: &NetworkInstance) -> Result<RateTuple> {
    let rates = (0..net.cells()).map(|k| achievable_rate(k, state, net)).collect::<Result<Vec<_>>>()?;
    RateTuple::new(rates)
}

/// Full-power maximum-ratio transmission beamformer `sqrt(P_k) h_kk / ||h_kk||`.
pub fn mrt_beamformer(k: usize, net: &NetworkInstance) -> Result<CVector> {
    net.check_cell(k)?;
    let h = net.channel(k, k);
    let n = h.norm();
    if n == 0.0 {
        return Err(Error::DegenerateChannel { cell: k, reason: "direct channel is zero".into() });
    }
    Ok(h * C64::new(net.power(k).sqrt() / n, 0.0))
}

/// Full-power zero-forcing beamformer: `h_kk` projected onto the orthogonal
/// complement of the cross channels `{h_kj : j != k}`, scaled to `||w||^2 = P_k`.
pub fn zf_beamformer(k: usize, net: &NetworkInstance) -> Result<CVector> {
    net.check_cell(k)?;
    let m = net.antennas(k);
    let cross: Vec<&CVector> = (0..net.cells()).filter(|&j| j != k).map(|j| net.channel(k, j)).collect();
    let mut basis = Vec::new();
    linalg::extend_orthonormal(&mut basis, &cross, 1e-10);
    if basis.len() >= m {
        return Err(Error::Infeasible { cell: k, antennas: m });
    }
    let h = net.channel(k, k);
    let r = linalg::project_out(h, &basis);
    let rn = r.norm();
    if rn <= 1e-12 * h.norm() || rn == 0.0 {
        return Err(Error::DegenerateChannel {
            cell: k,
            reason: "direct channel lies in the span of the cross channels".into(),
        });
    }
    Ok(r * C64::new(net.power(k).sqrt() / rn, 0.0))
}

/// `Γ̄_ij = |h_ij^H h_ii|^2 P_i / ||h_ii||^2`: the interference cell `i` causes
/// at mobile `j` with full-power MRT.
pub fn mrt_it_bound(i: usize, j: usize, net: &NetworkInstance) -> Result<f64> {
    net.check_cell(i)?;
    net.check_cell(j)?;
    if i == j {
        return Err(Error::Usage(format!("IT bound needs distinct cells, got {i} twice")));
    }
    let hii = net.channel(i, i);
    let n2 = hii.norm_squared();
    if n2 == 0.0 {
        return Err(Error::DegenerateChannel { cell: i, reason: "direct channel is zero".into() });
    }
    Ok(gain(net.channel(i, j), hii) * net.power(i) / n2)
}

/// Every cell on full-power MRT.
pub fn mrt_state(net: &NetworkInstance) -> Result<TransmitState> {
    let w = (0..net.cells()).map(|k| mrt_beamformer(k, net)).collect::<Result<Vec<_>>>()?;
    Ok(TransmitState::from_beamformers(w))
}

/// Every cell on full-power ZF.
pub fn zf_state(net: &NetworkInstance) -> Result<TransmitState> {
    let w = (0..net.cells()).map(|k| zf_beamformer(k, net)).collect::<Result<Vec<_>>>()?;
    Ok(TransmitState::from_beamformers(w))
}

/// `log2(1 + P_k ||h_kk||^2 / σ_k^2)`, the rate of user `k` when nobody else
/// transmits. Upper-bounds every achievable rate of that user.
pub fn interference_free_rate(k: usize, net: &NetworkInstance) -> f64 {
    (net.power(k) * net.channel(k, k).norm_squared() / net.noise(k)).ln_1p() / std::f64::consts::LN_2
}

/// Strict Pareto dominance: `a >= b` component-wise and `a != b`.
pub fn pareto_dominates(a: &RateTuple, b: &RateTuple) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("rate tuples of length {} and {}", a.len(), b.len())));
    }
    Ok(dominates(a.as_slice(), b.as_slice()))
}

pub(crate) fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y) && a.iter().zip(b).any(|(x, y)| x > y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn cv(v: &[f64]) -> CVector {
        CVector::from_iterator(v.len(), v.iter().map(|&x| c(x, 0.0)))
    }

    /// Two cells, two antennas each, orthogonal unit channels.
    fn hand_net() -> NetworkInstance {
        NetworkInstance::new(
            vec![2, 2],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            vec![vec![cv(&[1.0, 0.0]), cv(&[0.0, 1.0])], vec![cv(&[0.0, 1.0]), cv(&[1.0, 0.0])]],
        )
        .unwrap()
    }

    fn diag(a: f64, b: f64) -> CMatrix {
        CMatrix::from_diagonal(&cv(&[a, b]))
    }

    #[test]
    fn sinr_hand_value() {
        let net = hand_net();
        let state = TransmitState::from_covariances(vec![diag(1.0, 0.0), diag(0.0, 1.0)]);
        assert_relative_eq!(sinr(0, &state, &net).unwrap(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(achievable_rate(0, &state, &net).unwrap(), 1.5f64.log2(), epsilon = 1e-15);
        assert_relative_eq!(achievable_rate(0, &state, &net).unwrap(), 0.5849625007211562, epsilon = 1e-12);
    }

    #[test]
    fn sinr_without_interference_is_mrt_snr() {
        let net = NetworkInstance::new(
            vec![2, 2],
            vec![3.0, 2.0],
            vec![0.5, 1.0],
            vec![
                vec![CVector::from_vec(vec![c(1.0, 1.0), c(0.5, -0.2)]), cv(&[0.3, 0.1])],
                vec![cv(&[0.2, 0.7]), cv(&[1.0, 2.0])],
            ],
        )
        .unwrap();
        let w = mrt_beamformer(0, &net).unwrap();
        let state = TransmitState::from_covariances(vec![linalg::outer(&w), CMatrix::zeros(2, 2)]);
        let h = net.channel(0, 0);
        assert_relative_eq!(sinr(0, &state, &net).unwrap(), 3.0 * h.norm_squared() / 0.5, max_relative = 1e-13);
    }

    #[test]
    fn zero_signal_gives_zero_rate() {
        let net = hand_net();
        let state = TransmitState::from_covariances(vec![CMatrix::zeros(2, 2), diag(1.0, 1.0)]);
        assert_eq!(achievable_rate(0, &state, &net).unwrap(), 0.0);
    }

    #[test]
    fn single_user_mrt_is_one_bit() {
        let net = NetworkInstance::new(vec![2], vec![1.0], vec![1.0], vec![vec![cv(&[1.0, 0.0])]]).unwrap();
        let state = mrt_state(&net).unwrap();
        assert_relative_eq!(achievable_rate(0, &state, &net).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_structural_error() {
        let net = hand_net();
        let state = TransmitState::from_covariances(vec![diag(1.0, 0.0), CMatrix::zeros(3, 3)]);
        assert!(matches!(sinr(0, &state, &net), Err(Error::Dimension(_))));
        let short = TransmitState::from_covariances(vec![diag(1.0, 0.0)]);
        assert!(matches!(achievable_rate(0, &short, &net), Err(Error::Dimension(_))));
    }

    #[test]
    fn network_rejects_bad_inputs() {
        let ok = vec![vec![cv(&[1.0])]];
        assert!(NetworkInstance::new(vec![1], vec![0.0], vec![1.0], ok.clone()).is_err());
        assert!(NetworkInstance::new(vec![1], vec![1.0], vec![-1.0], ok.clone()).is_err());
        assert!(NetworkInstance::new(vec![2], vec![1.0], vec![1.0], ok).is_err());
    }

    #[test]
    fn interference_examples() {
        let mut net = hand_net();
        // h_01 = (1, 0) for these examples
        net.channels[0][1] = cv(&[1.0, 0.0]);
        let w = cv(&[0.0, 1.0]);
        assert_eq!(interference_level(0, 1, &linalg::outer(&w), &net).unwrap(), 0.0);
        net.channels[0][1] = cv(&[1.0, 1.0]);
        let w = cv(&[5f64.sqrt(), 0.0]);
        assert_relative_eq!(interference_level(0, 1, &linalg::outer(&w), &net).unwrap(), 5.0, epsilon = 1e-12);
        assert!(matches!(interference_level(1, 1, &diag(1.0, 0.0), &net), Err(Error::Usage(_))));
    }

    #[test]
    fn mrt_examples() {
        let net = NetworkInstance::new(vec![2], vec![25.0], vec![1.0], vec![vec![cv(&[3.0, 4.0])]]).unwrap();
        let w = mrt_beamformer(0, &net).unwrap();
        assert_relative_eq!(w[0].re, 3.0, epsilon = 1e-14);
        assert_relative_eq!(w[1].re, 4.0, epsilon = 1e-14);
        assert_relative_eq!(w.norm_squared(), 25.0, epsilon = 1e-12);
        assert_relative_eq!(gain(net.channel(0, 0), &w), 25.0 * 25.0, epsilon = 1e-9);

        let zero = NetworkInstance::new(vec![2], vec![1.0], vec![1.0], vec![vec![cv(&[0.0, 0.0])]]).unwrap();
        assert!(matches!(mrt_beamformer(0, &zero), Err(Error::DegenerateChannel { .. })));
    }

    #[test]
    fn zf_projects_onto_null_space() {
        let net = NetworkInstance::new(
            vec![2, 2],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            vec![vec![cv(&[1.0, 1.0]), cv(&[1.0, 0.0])], vec![cv(&[1.0, 0.0]), cv(&[1.0, 0.0])]],
        )
        .unwrap();
        let w = zf_beamformer(0, &net).unwrap();
        assert!(w[0].norm() < 1e-15);
        assert_relative_eq!(w[1].re, 1.0, epsilon = 1e-14);
        assert_relative_eq!(gain(net.channel(0, 0), &w), 1.0, epsilon = 1e-14);
        // h_11 parallel to h_10: no ZF direction with signal
        assert!(matches!(zf_beamformer(1, &net), Err(Error::DegenerateChannel { .. })));
    }

    #[test]
    fn zf_equals_mrt_for_orthogonal_cross_channel() {
        let net = hand_net();
        let zf = zf_beamformer(0, &net).unwrap();
        let mrt = mrt_beamformer(0, &net).unwrap();
        assert!((zf - mrt).norm() < 1e-15);
    }

    #[test]
    fn zf_needs_spare_antennas() {
        let net = NetworkInstance::new(
            vec![1, 1],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            vec![vec![cv(&[1.0]), cv(&[0.5])], vec![cv(&[0.5]), cv(&[1.0])]],
        )
        .unwrap();
        assert!(matches!(zf_beamformer(0, &net), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn it_bound_examples() {
        let mut net = hand_net();
        net.power[0] = 5.0;
        net.channels[0][1] = cv(&[1.0, 1.0]);
        assert_relative_eq!(mrt_it_bound(0, 1, &net).unwrap(), 5.0, epsilon = 1e-14);
        let mrt = mrt_beamformer(0, &net).unwrap();
        assert_relative_eq!(
            mrt_it_bound(0, 1, &net).unwrap(),
            interference_level(0, 1, &linalg::outer(&mrt), &net).unwrap(),
            epsilon = 1e-12
        );
        net.channels[0][1] = cv(&[0.0, 1.0]);
        assert_eq!(mrt_it_bound(0, 1, &net).unwrap(), 0.0);
    }

    #[test]
    fn dominance_examples() {
        let t = |v: &[f64]| RateTuple::new(v.to_vec()).unwrap();
        assert!(pareto_dominates(&t(&[1.5, 1.2]), &t(&[1.0, 1.0])).unwrap());
        assert!(!pareto_dominates(&t(&[2.0, 0.5]), &t(&[1.0, 1.0])).unwrap());
        assert!(!pareto_dominates(&t(&[1.0, 1.0]), &t(&[1.0, 1.0])).unwrap());
        assert!(pareto_dominates(&t(&[1.0]), &t(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn validate_rejects_overpowered_state() {
        let net = hand_net();
        assert!(TransmitState::from_covariances(vec![diag(1.0, 0.0), diag(0.5, 0.5)]).validate(&net).is_ok());
        assert!(TransmitState::from_covariances(vec![diag(1.0, 0.1), diag(0.5, 0.5)]).validate(&net).is_err());
        assert!(TransmitState::from_covariances(vec![diag(1.0, -0.1), diag(0.5, 0.5)]).validate(&net).is_err());
    }
}
