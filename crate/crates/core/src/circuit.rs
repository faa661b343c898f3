//! Analytic models of the chip.
//!
//! Two path-entangled pair sources S1 (photons A, B) and S2 (photons C, D)
//! feed a parity sorter that mixes the signal photons B and C. A four-fold
//! coincidence keeps only the `|0000⟩` and `|1111⟩` branches.
//!
//! Imperfections are lumped into [`NoiseParams`]: a white-noise weight, a
//! surviving GHZ coherence and a relative phase for the state itself, plus
//! spectral overlap and heralded purity for the heralded HOM fringe.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};
use crate::qmath::{ComplexMatrix, DensityMatrix, Ket, ZERO};

/// Noise model parameters.
///
/// Defaults reproduce the four-photon fidelity 0.729 and mean AVN error rate
/// 0.191 (see [`crate::nonlocality::calibrate`]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseParams {
    /// Weight `p` of the GHZ component; `1 − p` is white noise.
    pub p_white: f64,
    /// Fraction `c` of GHZ coherence surviving dephasing.
    pub coherence: f64,
    /// Relative phase `φ` of `|1…1⟩`, in radians.
    pub phase: f64,
    /// Path-correlation visibilities of sources S1 and S2.
    pub source_visibility: [f64; 2],
    /// Spectral overlap `σ` between signal photons of S1 and S2.
    pub overlap: f64,
    /// Heralded single-photon purity.
    pub purity: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            p_white: 0.8171,
            coherence: 0.7563,
            phase: 0.0,
            source_visibility: [0.935, 0.938],
            overlap: 0.95,
            purity: 0.902,
        }
    }
}

impl NoiseParams {
    /// Noise-free parameters with phase `phase`.
    pub fn ideal(phase: f64) -> Self {
        NoiseParams {
            p_white: 1.0,
            coherence: 1.0,
            phase,
            source_visibility: [1.0, 1.0],
            overlap: 1.0,
            purity: 1.0,
        }
    }

    pub fn with_state(p_white: f64, coherence: f64, phase: f64) -> Self {
        NoiseParams {
            p_white,
            coherence,
            phase,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("p_white", self.p_white)?;
        check_unit("coherence", self.coherence)?;
        check_unit("source_visibility[0]", self.source_visibility[0])?;
        check_unit("source_visibility[1]", self.source_visibility[1])?;
        check_unit("overlap", self.overlap)?;
        check_unit("purity", self.purity)?;
        if !self.phase.is_finite() {
            return Err(Error::OutOfRange {
                name: "phase",
                value: self.phase,
                range: "finite reals",
            });
        }
        Ok(())
    }

    /// Product `p·c`, the scale factor of every X/Y correlation.
    pub fn correlation(&self) -> f64 {
        self.p_white * self.coherence
    }
}

/// `|Ψ₂⟩ = (|00⟩ + |11⟩)/√2`.
pub fn bell_ket() -> Ket {
    Ket::ghz(2, 0.0)
}

/// Werner state `v·|Ψ₂⟩⟨Ψ₂| + (1 − v)·I/4`.
pub fn bell_state(visibility: f64) -> Result<DensityMatrix> {
    check_unit("visibility", visibility)?;
    let pure = DensityMatrix::from_pure(&bell_ket())?;
    DensityMatrix::mixture(&[
        (visibility, &pure),
        (1.0 - visibility, &DensityMatrix::maximally_mixed(2)),
    ])
}

/// Werner-state fidelity `(1 + 3v)/4`.
pub fn fidelity_from_visibility(visibility: f64) -> Result<f64> {
    check_unit("visibility", visibility)?;
    Ok((1.0 + 3.0 * visibility) / 4.0)
}

/// Arm of the parity sorter a photon leaves through.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arm {
    B,
    C,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PpsOutput {
    pub photon_b: Arm,
    pub photon_c: Arm,
}

impl PpsOutput {
    /// One photon in each output arm.
    pub fn coincidence(&self) -> bool {
        self.photon_b != self.photon_c
    }
}

/// Routes photons B and C (path modes 0 or 1) through the ideal parity
/// sorter: mode-1 photons swap arms, mode-0 photons keep theirs.
pub fn pps_route(mode_b: u8, mode_c: u8) -> PpsOutput {
    debug_assert!(mode_b <= 1 && mode_c <= 1);
    let photon_b = if mode_b == 1 { Arm::C } else { Arm::B };
    let photon_c = if mode_c == 1 { Arm::B } else { Arm::C };
    PpsOutput { photon_b, photon_c }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairEmissionEvent {
    pub n1: u32,
    pub n2: u32,
}

/// Distribution over pulses that emit exactly two pairs in total.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoPairStatistics {
    /// Both pairs from S1.
    pub p20: f64,
    /// One pair from each source.
    pub p11: f64,
    /// Both pairs from S2.
    pub p02: f64,
}

impl TwoPairStatistics {
    /// Independent Poissonian sources with means `mu1`, `mu2`, conditioned on
    /// two pairs in total.
    pub fn poisson(mu1: f64, mu2: f64) -> Result<Self> {
        if !(mu1 > 0.0 && mu2 > 0.0) {
            return Err(Error::OutOfRange {
                name: "mean pair number",
                value: mu1.min(mu2),
                range: "(0, ∞)",
            });
        }
        let (w20, w11, w02) = (mu1 * mu1 / 2.0, mu1 * mu2, mu2 * mu2 / 2.0);
        let total = w20 + w11 + w02;
        Ok(TwoPairStatistics {
            p20: w20 / total,
            p11: w11 / total,
            p02: w02 / total,
        })
    }

    pub fn probability(&self, event: PairEmissionEvent) -> f64 {
        match (event.n1, event.n2) {
            (2, 0) => self.p20,
            (1, 1) => self.p11,
            (0, 2) => self.p02,
            _ => 0.0,
        }
    }
}

/// Probability that a pair from each source survives the parity sorter,
/// by enumerating the four branches of `|Ψ₂⟩_AB ⊗ |Ψ₂⟩_CD`.
pub fn parity_survival_probability() -> f64 {
    let amp = bell_ket();
    let (mut survive, mut total) = (0.0, 0.0);
    for ab in [0usize, 3] {
        for cd in [0usize, 3] {
            let weight = (amp.amplitudes()[ab] * amp.amplitudes()[cd]).norm_sqr();
            total += weight;
            let (mode_b, mode_c) = ((ab & 1) as u8, (cd >> 1) as u8);
            if pps_route(mode_b, mode_c).coincidence() {
                survive += weight;
            }
        }
    }
    survive / total
}

/// Fraction of two-pair events that produce the four-fold GHZ coincidence.
///
/// `(2,0)` and `(0,2)` events never reach both heralding outputs A and D.
pub fn post_selection_probability(stats: &TwoPairStatistics) -> Result<f64> {
    let total = stats.p20 + stats.p11 + stats.p02;
    let negative = [stats.p20, stats.p11, stats.p02].iter().any(|&p| p < 0.0);
    if negative || (total - 1.0).abs() > 1e-12 {
        return Err(Error::OutOfRange {
            name: "two-pair distribution total",
            value: total,
            range: "a normalized distribution",
        });
    }
    Ok(stats.p11 * parity_survival_probability())
}

/// Post-selects two source states on the parity sorter's B–C coincidence.
///
/// Returns the four-photon state on (A, B, C, D) and the survival
/// probability. The parity sorter is a mode permutation followed by output
/// relabeling, so the heralded state is the input projected onto `b = c`.
pub fn parity_post_select(s1: &DensityMatrix, s2: &DensityMatrix) -> Result<(DensityMatrix, f64)> {
    if s1.num_qubits() != 2 || s2.num_qubits() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: s1.dim().max(s2.dim()),
        });
    }
    let joint = s1.kron(s2);
    let keep = |idx: usize| {
        let b = (idx >> 2) & 1;
        let c = (idx >> 1) & 1;
        pps_route(b as u8, c as u8).coincidence()
    };
    let m = joint.as_matrix();
    let projected =
        ComplexMatrix::from_fn(16, |i, j| if keep(i) && keep(j) { m[(i, j)] } else { ZERO });
    let prob = projected.trace().re;
    if prob < 1e-12 {
        return Err(Error::ImpossibleOutcome(prob));
    }
    let rho = DensityMatrix::new(projected.scale(Complex64::from(1.0 / prob)))?;
    Ok((rho, prob))
}

/// Noisy `n`-qubit GHZ state
/// `p·[(|0⟩⟨0| + |1⟩⟨1|)/2 + (c/2)(e^{−iφ}|0⟩⟨1| + e^{iφ}|1⟩⟨0|)] + (1 − p)·I/2ⁿ`,
/// with `|0⟩ = |0…0⟩`, `|1⟩ = |1…1⟩`.
pub fn ghz_state(n: usize, noise: &NoiseParams) -> Result<DensityMatrix> {
    check_unit("p_white", noise.p_white)?;
    check_unit("coherence", noise.coherence)?;
    if n == 0 {
        return Err(Error::InvalidQubits(
            "GHZ state needs at least one qubit".into(),
        ));
    }
    let dim = 1usize << n;
    let (p, c) = (noise.p_white, noise.coherence);
    let mut m = ComplexMatrix::identity(dim).scale(Complex64::from((1.0 - p) / dim as f64));
    let last = dim - 1;
    m[(0, 0)] += p / 2.0;
    m[(last, last)] += p / 2.0;
    let coh = Complex64::from_polar(p * c / 2.0, -noise.phase);
    m[(0, last)] += coh;
    m[(last, 0)] += coh.conj();
    DensityMatrix::new(m)
}

pub fn ghz4_state(noise: &NoiseParams) -> Result<DensityMatrix> {
    ghz_state(4, noise)
}

pub fn ghz3_state(noise: &NoiseParams) -> Result<DensityMatrix> {
    ghz_state(3, noise)
}

/// Fidelity of [`ghz_state`] with the ideal GHZ ket of the same phase.
pub fn ghz_model_fidelity(n: usize, p: f64, c: f64) -> f64 {
    p * (1.0 + c) / 2.0 + (1.0 - p) / (1u64 << n) as f64
}

/// Phase at which the four-photon Mermin value is maximal.
pub const MERMIN4_OPTIMAL_PHASE: f64 = 3.0 * PI / 4.0;

/// Two-fold coincidence probability `(1 + v·cos φ)/4` of idler in `|+⟩` and
/// signal in `(|0⟩ + e^{iφ}|1⟩)/√2`.
pub fn path_correlation_fringe(visibility: f64, phi: f64) -> Result<f64> {
    check_unit("visibility", visibility)?;
    Ok((1.0 + visibility * phi.cos()) / 4.0)
}

/// Same quantity as [`path_correlation_fringe`], computed from the Werner
/// state with the Born rule.
pub fn path_correlation_from_state(rho: &DensityMatrix, phi: f64) -> Result<f64> {
    if rho.num_qubits() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: rho.dim(),
        });
    }
    let analyzer = Ket::plus().kron(&Ket::equator(phi));
    crate::qmath::fidelity_with_pure(rho, &analyzer)
}

/// Heralded HOM coincidence versus MZI transmittance `t`, normalized so the
/// pass/cross settings give 1.
pub fn hhom_fringe(overlap: f64, purity: f64, t: f64) -> Result<f64> {
    check_unit("overlap", overlap)?;
    check_unit("purity", purity)?;
    check_unit("transmittance", t)?;
    let indist = overlap * overlap * purity;
    Ok(t * t + (1.0 - t) * (1.0 - t) - 2.0 * t * (1.0 - t) * indist)
}

/// `V = (CC_max/2 − CC_min)/(CC_max/2) = σ²·Pur`.
pub fn hhom_visibility(overlap: f64, purity: f64) -> Result<f64> {
    check_unit("overlap", overlap)?;
    check_unit("purity", purity)?;
    Ok(overlap * overlap * purity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::{expectation, fidelity_with_pure, project_qubit, PauliString};
    use approx::assert_abs_diff_eq;

    #[test]
    fn werner_states() {
        let pure = bell_state(1.0).unwrap();
        assert_abs_diff_eq!(
            fidelity_with_pure(&pure, &bell_ket()).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        let mixed = bell_state(0.0).unwrap();
        assert!(
            mixed
                .as_matrix()
                .max_abs_diff(DensityMatrix::maximally_mixed(2).as_matrix())
                < 1e-15
        );
        let f = fidelity_with_pure(&bell_state(0.935).unwrap(), &bell_ket()).unwrap();
        assert_abs_diff_eq!(f, 0.951_25, epsilon = 1e-12);
        assert!((f - 0.952).abs() <= 0.002);
    }

    #[test]
    fn visibility_to_fidelity() {
        assert_eq!(fidelity_from_visibility(1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(
            fidelity_from_visibility(0.938).unwrap(),
            0.9535,
            epsilon = 1e-12
        );
        assert_eq!(fidelity_from_visibility(0.0).unwrap(), 0.25);
        assert!(fidelity_from_visibility(1.1).is_err());
        assert!(fidelity_from_visibility(-0.1).is_err());
    }

    #[test]
    fn parity_sorter_routes() {
        assert!(pps_route(0, 0).coincidence());
        let swapped = pps_route(1, 1);
        assert!(swapped.coincidence());
        assert_eq!((swapped.photon_b, swapped.photon_c), (Arm::C, Arm::B));
        assert!(!pps_route(0, 1).coincidence());
        assert_eq!(pps_route(0, 1).photon_b, Arm::B);
        assert_eq!(pps_route(0, 1).photon_c, Arm::B);
        assert!(!pps_route(1, 0).coincidence());
    }

    #[test]
    fn post_selection() {
        let equal = TwoPairStatistics::poisson(0.01, 0.01).unwrap();
        assert_abs_diff_eq!(equal.p11, 0.5, epsilon = 1e-15);
        assert_eq!(post_selection_probability(&equal).unwrap(), 0.25);
        let only11 = TwoPairStatistics {
            p20: 0.0,
            p11: 1.0,
            p02: 0.0,
        };
        assert_eq!(post_selection_probability(&only11).unwrap(), 0.5);
        let none = TwoPairStatistics {
            p20: 0.5,
            p11: 0.0,
            p02: 0.5,
        };
        assert_eq!(post_selection_probability(&none).unwrap(), 0.0);
        let bad = TwoPairStatistics {
            p20: 0.5,
            p11: 0.5,
            p02: 0.5,
        };
        assert!(post_selection_probability(&bad).is_err());
        assert_eq!(
            equal.probability(PairEmissionEvent { n1: 1, n2: 1 }),
            equal.p11
        );
    }

    #[test]
    fn parity_post_selection_yields_ghz() {
        let (rho, prob) =
            parity_post_select(&bell_state(1.0).unwrap(), &bell_state(1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(prob, 0.5, epsilon = 1e-12);
        let ideal = ghz4_state(&NoiseParams::ideal(0.0)).unwrap();
        assert!(rho.as_matrix().max_abs_diff(ideal.as_matrix()) < 1e-12);
    }

    #[test]
    fn ghz_closed_forms() {
        let ideal = ghz4_state(&NoiseParams::ideal(0.0)).unwrap();
        let pure = DensityMatrix::from_pure(&Ket::ghz(4, 0.0)).unwrap();
        assert!(ideal.as_matrix().max_abs_diff(pure.as_matrix()) < 1e-15);

        let noise = NoiseParams::with_state(0.8171, 0.7563, 0.0);
        let f4 = fidelity_with_pure(&ghz4_state(&noise).unwrap(), &Ket::ghz(4, 0.0)).unwrap();
        assert_abs_diff_eq!(f4, ghz_model_fidelity(4, 0.8171, 0.7563), epsilon = 1e-12);
        assert_abs_diff_eq!(f4, 0.729, epsilon = 5e-4);
        let f3 = fidelity_with_pure(&ghz3_state(&noise).unwrap(), &Ket::ghz(3, 0.0)).unwrap();
        assert_abs_diff_eq!(f3, ghz_model_fidelity(3, 0.8171, 0.7563), epsilon = 1e-12);
        assert_abs_diff_eq!(f3, 0.740, epsilon = 5e-4);

        let rotated = ghz4_state(&NoiseParams::ideal(MERMIN4_OPTIMAL_PHASE)).unwrap();
        let target = DensityMatrix::from_pure(&Ket::ghz(4, MERMIN4_OPTIMAL_PHASE)).unwrap();
        assert!(rotated.as_matrix().max_abs_diff(target.as_matrix()) < 1e-15);
    }

    #[test]
    fn ghz3_matches_projection_for_every_qubit() {
        let noise = NoiseParams::with_state(0.8171, 0.7563, 0.4);
        let rho4 = ghz4_state(&noise).unwrap();
        let rho3 = ghz3_state(&noise).unwrap();
        for q in 0..4 {
            let (cond, prob) = project_qubit(&rho4, q, &Ket::plus()).unwrap();
            assert_abs_diff_eq!(prob, 0.5, epsilon = 1e-12);
            assert!(
                cond.as_matrix().max_abs_diff(rho3.as_matrix()) < 1e-10,
                "qubit {q}"
            );
        }
    }

    #[test]
    fn correlation_scaling() {
        let ideal = ghz4_state(&NoiseParams::ideal(0.0)).unwrap();
        let noise = NoiseParams::with_state(0.7, 0.6, 0.0);
        let rho = ghz4_state(&noise).unwrap();
        let xy: Vec<PauliString> = PauliString::all(4)
            .into_iter()
            .filter(|s| {
                s.symbols()
                    .iter()
                    .all(|p| matches!(p, crate::Pauli::X | crate::Pauli::Y))
            })
            .collect();
        assert_eq!(xy.len(), 16);
        for s in &xy {
            let ideal_val = expectation(&ideal, s).unwrap();
            assert_abs_diff_eq!(
                expectation(&rho, s).unwrap(),
                0.42 * ideal_val,
                epsilon = 1e-10
            );
        }
        for s in ["ZZII", "IZZI", "ZIIZ", "ZZZZ", "IIZZ"] {
            let s: PauliString = s.parse().unwrap();
            assert_abs_diff_eq!(expectation(&rho, &s).unwrap(), 0.7, epsilon = 1e-10);
        }
    }

    #[test]
    fn path_fringe() {
        assert_abs_diff_eq!(
            path_correlation_fringe(1.0, 0.0).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            path_correlation_fringe(1.0, PI).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        for phi in [0.0, 0.3, 1.0, 2.5] {
            assert_eq!(path_correlation_fringe(0.0, phi).unwrap(), 0.25);
            let rho = bell_state(0.935).unwrap();
            assert_abs_diff_eq!(
                path_correlation_from_state(&rho, phi).unwrap(),
                path_correlation_fringe(0.935, phi).unwrap(),
                epsilon = 1e-12
            );
        }
        let (max, min) = (
            path_correlation_fringe(0.935, 0.0).unwrap(),
            path_correlation_fringe(0.935, PI).unwrap(),
        );
        assert_abs_diff_eq!((max - min) / (max + min), 0.935, epsilon = 1e-12);
    }

    #[test]
    fn hhom() {
        assert_abs_diff_eq!(hhom_fringe(1.0, 1.0, 0.5).unwrap(), 0.0, epsilon = 1e-15);
        let sigma = 0.814f64.sqrt();
        assert_abs_diff_eq!(
            hhom_fringe(sigma, 1.0, 0.5).unwrap(),
            0.093,
            epsilon = 1e-12
        );
        for t in [0.0, 0.2, 0.5, 0.9] {
            assert_abs_diff_eq!(
                hhom_fringe(0.0, 0.7, t).unwrap(),
                t * t + (1.0 - t) * (1.0 - t),
                epsilon = 1e-15
            );
        }
        assert_eq!(hhom_visibility(1.0, 1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(hhom_visibility(0.95, 0.902).unwrap(), 0.814, epsilon = 1e-3);
        assert_eq!(hhom_visibility(0.6, 0.0).unwrap(), 0.0);
        let (s, p) = (0.95, 0.902);
        let cc_max = hhom_fringe(s, p, 0.0).unwrap();
        let cc_min = hhom_fringe(s, p, 0.5).unwrap();
        let v = (cc_max / 2.0 - cc_min) / (cc_max / 2.0);
        assert_abs_diff_eq!(v, hhom_visibility(s, p).unwrap(), epsilon = 1e-12);
    }
}
