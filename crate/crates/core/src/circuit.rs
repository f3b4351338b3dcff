//! Capacitance network of a floating transmon (two pads) coupled to one
//! resonator node, reduced to an effective qubit capacitance and a coupling
//! capacitance by eliminating the free "plus" mode.
//!
//! Nodes: 1 and 2 are the pads, 3 is the resonator (or any parasitic node).

use alloc::vec::Vec;

use crate::linalg::Lu;
use crate::{Error, Result};

pub type Matrix3 = [[f64; 3]; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacitanceNetwork {
    /// Pad 1 to ground.
    pub c1: f64,
    /// Pad 2 to ground.
    pub c2: f64,
    /// Between the pads.
    pub c_sh: f64,
    /// Resonator node to ground.
    pub c_r: f64,
    /// Pad 1 to resonator.
    pub c_g1: f64,
    /// Pad 2 to resonator.
    pub c_g2: f64,
}

impl CapacitanceNetwork {
    pub fn validate(&self) -> Result<()> {
        let strict = [self.c1, self.c2, self.c_sh, self.c_r];
        let loose = [self.c_g1, self.c_g2];
        if strict.iter().any(|c| !(*c > 0.0) || !c.is_finite()) || loose.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
            return Err(Error::NonPositiveCapacitance);
        }
        Ok(())
    }

    /// Pad labels exchanged.
    pub fn mirrored(&self) -> Self {
        Self { c1: self.c2, c2: self.c1, c_g1: self.c_g2, c_g2: self.c_g1, ..*self }
    }
}

/// Kinetic matrix `Č` with `T = ½ Φ̇ᵀ Č Φ̇`.
pub fn build_capacitance_matrix(net: &CapacitanceNetwork) -> Result<Matrix3> {
    net.validate()?;
    let CapacitanceNetwork { c1, c2, c_sh, c_r, c_g1, c_g2 } = *net;
    Ok([
        [c1 + c_sh + c_g1, -c_sh, -c_g1],
        [-c_sh, c2 + c_sh + c_g2, -c_g2],
        [-c_g1, -c_g2, c_r + c_g1 + c_g2],
    ])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedCircuit {
    /// Effective transmon capacitance `C_q,eff`.
    pub c_qubit: f64,
    /// Effective coupling capacitance `C_c`.
    pub c_coupling: f64,
    /// Effective resonator capacitance.
    pub c_resonator: f64,
    /// Largest relative deviation between the pipeline and the closed forms.
    pub residual: f64,
}

fn invert(m: &[f64], n: usize) -> Result<Vec<f64>> {
    Ok(Lu::factor(m.to_vec(), n)?.inverse())
}

fn flatten(m: &Matrix3) -> Vec<f64> {
    m.iter().flatten().copied().collect()
}

/// Plus/minus transform, inversion, removal of the plus mode, re-inversion.
pub fn reduce_floating(net: &CapacitanceNetwork) -> Result<ReducedCircuit> {
    let c = build_capacitance_matrix(net)?;
    // S maps (Φ+, Φ-, Φ3) to node fluxes; S is symmetric and S⁻¹ = S/2 on
    // the pad block.
    let s_inv = [[0.5, 0.5, 0.0], [0.5, -0.5, 0.0], [0.0, 0.0, 1.0]];
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = (0..3).flat_map(|k| (0..3).map(move |l| (k, l))).map(|(k, l)| s_inv[i][k] * c[k][l] * s_inv[l][j]).sum();
        }
    }
    let inv = invert(&flatten(&t), 3)?;
    let traced = [inv[4], inv[5], inv[7], inv[8]];
    let eff = invert(&traced, 2)?;
    let c_qubit = eff[0];
    let c_coupling = -eff[1];
    let c_resonator = eff[3];
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(a.abs()).max(f64::MIN_POSITIVE);
    // the coupling is compared on the scale of the qubit capacitance, since
    // it may vanish
    let residual = rel(c_qubit, closed_form_qubit_capacitance(net))
        .max((c_coupling - closed_form_coupling(net)).abs() / c_qubit.abs());
    Ok(ReducedCircuit { c_qubit, c_coupling, c_resonator, residual })
}

/// `C_sh + ((C_1 + C_g1)⁻¹ + (C_2 + C_g2)⁻¹)⁻¹`.
pub fn closed_form_qubit_capacitance(net: &CapacitanceNetwork) -> f64 {
    let a = net.c1 + net.c_g1;
    let b = net.c2 + net.c_g2;
    net.c_sh + a * b / (a + b)
}

/// `(C_g1 C_2 - C_g2 C_1) / (C_1 + C_2 + C_g1 + C_g2)`.
pub fn closed_form_coupling(net: &CapacitanceNetwork) -> f64 {
    (net.c_g1 * net.c2 - net.c_g2 * net.c1) / (net.c1 + net.c2 + net.c_g1 + net.c_g2)
}

fn check_positive(values: &[f64]) -> Result<()> {
    if values.iter().any(|c| !(*c > 0.0) || !c.is_finite()) {
        return Err(Error::NonPositiveCapacitance);
    }
    Ok(())
}

/// Coupling of a floating transmon with pads to ground `C_G` to a parasitic
/// node reached through `C_P` and `C_P'`: `C_G (C_P - C_P') / (2 C_G + C_P + C_P')`.
/// The labels are swapped when `C_P' > C_P`.
pub fn parasitic_coupling_floating(c_g: f64, c_p: f64, c_p_prime: f64) -> Result<f64> {
    check_positive(&[c_g, c_p, c_p_prime])?;
    let (hi, lo) = if c_p_prime > c_p { (c_p_prime, c_p) } else { (c_p, c_p_prime) };
    Ok(c_g * (hi - lo) / (2.0 * c_g + hi + lo))
}

/// The same coupling from the matrix pipeline, with arbitrary shunt and
/// parasitic-node capacitances (neither enters the result).
pub fn parasitic_coupling_floating_numeric(c_g: f64, c_p: f64, c_p_prime: f64, c_sh: f64, c_node: f64) -> Result<f64> {
    check_positive(&[c_g, c_p, c_p_prime])?;
    let (hi, lo) = if c_p_prime > c_p { (c_p_prime, c_p) } else { (c_p, c_p_prime) };
    let net = CapacitanceNetwork { c1: c_g, c2: c_g, c_sh, c_r: c_node, c_g1: hi, c_g2: lo };
    Ok(reduce_floating(&net)?.c_coupling)
}

/// A grounded transmon couples to the parasitic node with the full `C_P`.
pub fn parasitic_coupling_grounded(c_p: f64) -> Result<f64> {
    check_positive(&[c_p])?;
    Ok(c_p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParasiticPoint {
    pub c_p: f64,
    pub c_p_prime: f64,
    pub c_g: f64,
    pub c_eff_floating: f64,
    /// Floating over grounded coupling.
    pub ratio: f64,
}

/// Floating versus grounded parasitic coupling over `C_G` and `C_P'` at
/// fixed `C_P`.
pub fn parasitic_grid(c_p: f64, c_p_prime_values: &[f64], c_g_values: &[f64]) -> Result<Vec<ParasiticPoint>> {
    let mut out = Vec::with_capacity(c_p_prime_values.len() * c_g_values.len());
    for &c_g in c_g_values {
        for &c_p_prime in c_p_prime_values {
            let f = parasitic_coupling_floating(c_g, c_p, c_p_prime)?;
            out.push(ParasiticPoint { c_p, c_p_prime, c_g, c_eff_floating: f, ratio: f / parasitic_coupling_grounded(c_p)? });
        }
    }
    Ok(out)
}
