//! Reference surrogate-bath parameter sets with converged local dimensions,
//! used by the validation commands and the acceptance tests.
//!
//! Ohmic sets are in units of the cutoff Ω_c; the structured-environment sets
//! are stored in cm⁻¹ (source tables use 100 cm⁻¹ as the unit; converted
//! here).

use num_complex::Complex64;

use crate::spectral::{BathSpec, Beta, SpectralComponent, Unit};
use crate::surrogate::SurrogateBath;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn bath(
    unit: Unit,
    scale: f64,
    freqs: &[f64],
    coups: &[f64],
    rates: &[f64],
    coeffs: &[Complex64],
    dims: &[usize],
) -> SurrogateBath {
    SurrogateBath::new(
        freqs.iter().map(|x| x * scale).collect(),
        coups.iter().map(|x| x * scale).collect(),
        rates.iter().map(|x| x * scale).collect(),
        coeffs.iter().map(|z| z * scale).collect(),
        dims.to_vec(),
        unit,
    )
    .expect("fixture parameters are valid")
}

/// Four modes reproducing the Ohmic correlation function at T = 0
/// (units Ω_c). Local dimensions converged for the dephasing-qubit run.
pub fn ohmic_t0() -> SurrogateBath {
    bath(
        Unit::OmegaC,
        1.0,
        &[2.70796, 2.13014, 1.15884, 0.310906],
        &[3.38195, 1.43514, 0.491546],
        &[11.9298, 0.573494, 0.0317143, 0.000795693],
        &[c(-0.0333215, -0.0121362), c(0.319, 0.0811955), c(0.760716, 0.0175762), c(0.579218, 0.0)],
        &[3, 4, 5, 7],
    )
}

/// Local dimensions for the same set when driving a site chain instead of a qubit.
pub fn ohmic_t0_chain_dims() -> Vec<usize> {
    vec![4, 4, 5, 7]
}

/// Four modes for the Ohmic bath at T = Ω_c (units Ω_c).
pub fn ohmic_t1() -> SurrogateBath {
    bath(
        Unit::OmegaC,
        1.0,
        &[0.512683, 2.53779, 4.53293, 0.151433],
        &[1.82454, 3.20774, 1.60194],
        &[0.056336, 4.42709, 15.7371, 0.110104],
        &[c(-0.962917, 0.819128), c(-0.227707, 0.0701249), c(0.231179, -0.137866), c(0.818093, 0.0)],
        &[5, 4, 4, 7],
    )
}

pub fn ohmic_t1_chain_dims() -> Vec<usize> {
    vec![7, 4, 3, 8]
}

/// Five modes for the Ohmic bath at T = (5/2) Ω_c (units Ω_c).
pub fn ohmic_t2p5() -> SurrogateBath {
    bath(
        Unit::OmegaC,
        1.0,
        &[0.306859, 0.361308, 0.167597, 0.0297981, 0.00236395],
        &[4.17718, 2.1243, 0.673391, 0.166947],
        &[16.0093, 2.76375, 0.00358704, 0.0949691, 0.0517414],
        &[
            c(-0.166675, -0.0342019),
            c(0.21927, 0.103791),
            c(1.61933, -0.00703994),
            c(0.187388, -1.07416),
            c(1.1553, 0.0),
        ],
        &[3, 3, 4, 4, 6],
    )
}

/// Super-Ohmic background sets (cm⁻¹; source unit 100 cm⁻¹).
pub fn adolphs_renger_t0() -> SurrogateBath {
    bath(
        Unit::InvCm,
        100.0,
        &[0.718918, 3.06543, 2.96082, 0.667101],
        &[2.10958, 3.91248, 1.56527],
        &[0.00554063, 15.4881, 0.00291091, 0.294244],
        &[c(-0.57271, 0.06491), c(-0.0147923, 0.0820348), c(0.725729, 0.0119678), c(0.409762, 0.0)],
        &[6, 4, 4, 4],
    )
}

pub fn adolphs_renger_t77() -> SurrogateBath {
    bath(
        Unit::InvCm,
        100.0,
        &[3.05106, 2.74196, 0.00670418, 0.00780109],
        &[2.74161, 2.01796, 0.33975],
        &[0.0284151, 11.6481, 0.00549033, 0.0184315],
        &[
            c(-0.910465, -0.0164266),
            c(-0.135049, -0.0104797),
            c(0.524001, 0.317767),
            c(0.114767, 0.0),
        ],
        &[5, 4, 6, 8],
    )
}

pub fn adolphs_renger_t300() -> SurrogateBath {
    bath(
        Unit::InvCm,
        100.0,
        &[0.788783, 0.414407, -0.0300357, -0.034035],
        &[3.10576, 0.978945, 0.294823],
        &[10.4575, 0.0934767, 0.00983292, 0.0167273],
        &[c(0.189405, 0.0639657), c(1.23326, 0.451035), c(0.0221509, 0.962709), c(0.365249, 0.0)],
        &[3, 4, 7, 7],
    )
}

/// Narrow vibrational peak at 227.5 cm⁻¹ (S = 0.0379): one mode at T = 0.
pub fn lorentzian_227_t0() -> SurrogateBath {
    bath(Unit::InvCm, 100.0, &[2.275], &[], &[0.197195], &[c(0.440408, 0.0)], &[5])
}

/// Same peak at T = 77 K: two interacting modes.
pub fn lorentzian_227_t77() -> SurrogateBath {
    bath(
        Unit::InvCm,
        100.0,
        &[0.662126, -0.667153],
        &[2.1788],
        &[0.264596, 0.0788813],
        &[c(0.333222, -0.000005), c(0.296358, 0.0)],
        &[4, 4],
    )
}

pub fn lorentzian_227_t300() -> SurrogateBath {
    bath(
        Unit::InvCm,
        100.0,
        &[-0.00139464, 0.0013106],
        &[2.2772],
        &[0.00326568, 0.396252],
        &[c(0.578109, -0.176482), c(0.169995, 0.0)],
        &[4, 4],
    )
}

/// Strong peak at 200 cm⁻¹ (S = 0.25) used in the polymer bath.
pub fn lorentzian_200_t0() -> SurrogateBath {
    bath(Unit::InvCm, 100.0, &[2.00], &[], &[0.098296], &[c(0.992322, 0.0)], &[6])
}

pub fn lorentzian_200_t77() -> SurrogateBath {
    bath(
        Unit::InvCm,
        100.0,
        &[-0.318699, 0.316331],
        &[1.976],
        &[0.045988, 0.138442],
        &[c(0.764199, 0.000002), c(0.676024, 0.0)],
        &[5, 6],
    )
}

pub fn lorentzian_200_t300() -> SurrogateBath {
    bath(
        Unit::InvCm,
        100.0,
        &[-0.00048954, 0.000480821],
        &[2.00052],
        &[0.00953908, 0.190362],
        &[c(1.45733, 0.000003), c(0.343374, 0.0)],
        &[8, 8],
    )
}

/// Ohmic bath spec at temperature T (in units of Ω_c, with Ω_c = 1).
pub fn ohmic_spec(t_over_cutoff: f64) -> BathSpec {
    let beta = if t_over_cutoff == 0.0 { Beta::Infinite } else { Beta::Finite(1.0 / t_over_cutoff) };
    BathSpec::new(
        vec![SpectralComponent::Ohmic { cutoff: 1.0, scale: 1.0 }],
        beta,
        Unit::OmegaC,
    )
    .expect("valid ohmic spec")
}

/// Super-Ohmic background spectral density (cm⁻¹).
pub fn adolphs_renger_component() -> SpectralComponent {
    SpectralComponent::AdolphsRenger {
        cutoffs: [0.557, 1.936],
        weights: [288.0 / 5.0 * 8.0 / 13.0, 288.0 / 5.0 * 5.0 / 13.0],
    }
}

/// The dimer's site bath: background only (J₀) or with the 227.5 cm⁻¹ peak (J₁).
pub fn dimer_bath(with_peak: bool, temperature_invcm: f64) -> BathSpec {
    let beta = if temperature_invcm == 0.0 {
        Beta::Infinite
    } else {
        Beta::Finite(1.0 / temperature_invcm)
    };
    let mut components = vec![adolphs_renger_component()];
    if with_peak {
        components.push(SpectralComponent::AntisymLorentzian {
            center: 227.5,
            width: 20.0,
            huang_rhys: 0.0379,
        });
    }
    BathSpec::new(components, beta, Unit::InvCm).expect("valid dimer bath")
}

/// The polymer's site bath: Ohmic background (Ω_c = 200 cm⁻¹, κ = 0.25) plus
/// a strong sharp mode at 1000 cm⁻¹.
pub fn polymer_bath(temperature_invcm: f64) -> BathSpec {
    let beta = if temperature_invcm == 0.0 {
        Beta::Infinite
    } else {
        Beta::Finite(1.0 / temperature_invcm)
    };
    BathSpec::new(
        vec![
            SpectralComponent::Ohmic { cutoff: 200.0, scale: 0.25 },
            SpectralComponent::AntisymLorentzian { center: 1000.0, width: 20.0, huang_rhys: 0.25 },
        ],
        beta,
        Unit::InvCm,
    )
    .expect("valid polymer bath")
}

/// T = 77 K in wavenumbers.
pub const T77K_INVCM: f64 = 53.5;
/// T = 300 K in wavenumbers.
pub const T300K_INVCM: f64 = 208.5;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fixture_sums_are_real_positive() {
        for b in [ohmic_t0(), ohmic_t1(), ohmic_t2p5(), adolphs_renger_t77()] {
            assert!(b.coeff_norm_sqr() > 0.0);
        }
    }

    #[test]
    fn reorganization_energies_match_references() {
        let ar = BathSpec::new(vec![adolphs_renger_component()], Beta::Infinite, Unit::InvCm).unwrap();
        assert_relative_eq!(ar.reorganization_energy().unwrap(), 19.93, epsilon = 0.01);
        let full = dimer_bath(true, 0.0);
        assert_relative_eq!(full.reorganization_energy().unwrap(), 28.55, epsilon = 0.01);
        let poly = polymer_bath(0.0);
        assert_relative_eq!(poly.reorganization_energy().unwrap(), 300.0, max_relative = 1e-4);
    }
}
