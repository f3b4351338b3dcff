use std::sync::Arc;

use hcb_core::basis::{binomial, sector_basis, PureState, Space};
use hcb_core::circuit::{closed_form_coupling, closed_form_qubit_capacitance, reduce_floating, CapacitanceNetwork};
use hcb_core::hamiltonian::{build_driven_hamiltonian, build_sector_hamiltonian, DisorderRealization};
use hcb_core::krylov::evolve;
use hcb_core::lattice::{build_square_lattice, Subset};
use hcb_core::observables::{correlation_matrix, entanglement_entropy};
use hcb_core::spectra::{diagonalize_sector, Mode};
use num_complex::Complex64;
use proptest::prelude::*;

fn lattice_dims() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=3, 1usize..=3).prop_filter("at least two sites", |(r, c)| r * c >= 2)
}

fn detunings(sites: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, sites)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn basis_ranks_are_a_bijection(sites in 1usize..=12, frac in 0.0f64..=1.0) {
        let n = (frac * sites as f64).round() as usize;
        let basis = sector_basis(sites, n).unwrap();
        prop_assert_eq!(basis.len() as u64, binomial(sites, n));
        for (k, &m) in basis.states().iter().enumerate() {
            prop_assert_eq!(m.count_ones() as usize, n);
            prop_assert_eq!(basis.index_of(m), Some(k));
        }
        prop_assert!(basis.states().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn sector_trace_and_spectrum_sum(
        (dims, d) in lattice_dims().prop_flat_map(|(r, c)| (Just((r, c)), detunings(r * c))),
        frac in 0.0f64..=1.0,
    ) {
        let lattice = build_square_lattice(dims.0, dims.1).unwrap();
        let sites = lattice.num_sites();
        let n = (frac * sites as f64).round() as usize;
        let disorder = DisorderRealization::from_detunings(d.clone(), 0, 0.0);
        let basis = sector_basis(sites, n).unwrap();
        let h = build_sector_hamiltonian(&lattice, &disorder, 1.0, &basis).unwrap();
        prop_assert_eq!(h.hermitian_deviation(), 0.0);
        // each site is occupied in C(N-1, n-1) configurations
        let expected = if n == 0 { 0.0 } else { d.iter().sum::<f64>() * binomial(sites - 1, n - 1) as f64 };
        let trace: f64 = (0..basis.len()).map(|k| h.get(k, k)).sum();
        prop_assert!((trace - expected).abs() < 1e-10);
        let dec = diagonalize_sector(&h, n, Mode::ValuesOnly).unwrap();
        prop_assert!((dec.values().iter().sum::<f64>() - expected).abs() < 1e-9);
        prop_assert!(dec.values().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn entropy_of_subset_equals_complement(
        (dims, amps) in lattice_dims().prop_flat_map(|(r, c)| {
            let dim = binomial(r * c, (r * c) / 2) as usize;
            (Just((r, c)), prop::collection::vec(-1.0f64..1.0, dim))
        }),
        mask_seed in any::<u64>(),
    ) {
        let lattice = build_square_lattice(dims.0, dims.1).unwrap();
        let sites = lattice.num_sites();
        prop_assume!(amps.iter().any(|a| a.abs() > 1e-3));
        let basis = Arc::new(sector_basis(sites, sites / 2).unwrap());
        let norm = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
        let amps: Vec<f64> = amps.iter().map(|a| a / norm).collect();
        let state = PureState::from_real(basis, &amps).unwrap();
        let mask = mask_seed & lattice.full_mask();
        prop_assume!(mask != 0 && mask != lattice.full_mask());
        let subset = Subset::from_mask(&lattice, mask).unwrap();
        let complement = subset.complement(&lattice).unwrap();
        let a = entanglement_entropy(&state, &subset).unwrap();
        let b = entanglement_entropy(&state, &complement).unwrap();
        prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
        // 𝒮 carries a factor of two over the Rényi-2 entropy
        let bound = 2.0 * subset.volume().min(complement.volume()) as f64 * 2f64.ln();
        prop_assert!(a >= 0.0 && a <= bound + 1e-9);
    }

    #[test]
    fn correlations_are_symmetric(
        (dims, amps) in lattice_dims().prop_flat_map(|(r, c)| {
            (Just((r, c)), prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1usize << (r * c)))
        }),
    ) {
        let lattice = build_square_lattice(dims.0, dims.1).unwrap();
        let sites = lattice.num_sites();
        let amps: Vec<Complex64> = amps.into_iter().map(|(re, im)| Complex64::new(re, im)).collect();
        prop_assume!(amps.iter().any(|a| a.norm() > 1e-3));
        let state = PureState::normalized(Space::Full { sites }, amps).unwrap();
        let c = correlation_matrix(&state, &lattice).unwrap();
        for i in 0..sites {
            // <σx σx> = 1 on the diagonal
            prop_assert!(c.get(i, i) <= 1.0 + 1e-12);
            prop_assert!(c.get(i, i) >= -1e-12);
            for j in 0..sites {
                prop_assert!((c.get(i, j) - c.get(j, i)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn evolution_is_unitary(
        (dims, d, g) in lattice_dims().prop_filter("small", |(r, c)| r * c <= 6).prop_flat_map(|(r, c)| {
            (Just((r, c)), detunings(r * c), prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), r * c))
        }),
        t in 0.0f64..5.0,
    ) {
        let lattice = build_square_lattice(dims.0, dims.1).unwrap();
        let sites = lattice.num_sites();
        let disorder = DisorderRealization::from_detunings(d, 0, 0.0);
        let coupling: Vec<Complex64> = g.into_iter().map(|(a, b)| Complex64::new(a, b)).collect();
        let h = build_driven_hamiltonian(&lattice, &disorder, 1.0, &coupling, -0.5).unwrap();
        prop_assert!(h.hermitian_deviation() < 1e-14);
        let psi = PureState::vacuum(sites).unwrap();
        let out = evolve(&psi, &h, t, 1e-12).unwrap();
        prop_assert!((out.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn reduction_matches_closed_forms(
        c1 in 1.0f64..200.0, c2 in 1.0f64..200.0, c_sh in 1.0f64..200.0,
        c_r in 10.0f64..1000.0, c_g1 in 0.0f64..50.0, c_g2 in 0.0f64..50.0,
    ) {
        let net = CapacitanceNetwork { c1, c2, c_sh, c_r, c_g1, c_g2 };
        let r = reduce_floating(&net).unwrap();
        let cq = closed_form_qubit_capacitance(&net);
        prop_assert!((r.c_qubit - cq).abs() <= 1e-12 * cq);
        prop_assert!((r.c_coupling - closed_form_coupling(&net)).abs() <= 1e-12 * cq);
        // swapping the pads flips the sign of the coupling only
        let m = reduce_floating(&net.mirrored()).unwrap();
        prop_assert!((m.c_qubit - r.c_qubit).abs() <= 1e-12 * cq);
        prop_assert!((m.c_coupling + r.c_coupling).abs() <= 1e-12 * cq);
    }
}
