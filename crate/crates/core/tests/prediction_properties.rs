use std::f64::consts::FRAC_PI_4;

use hplab::membrane::saturation_delta;
use hplab::predictions::{
    duc_plateau, integrable_du_delta, is_revival_time, perturbed_decay, scrambled_plateau_from_strings,
};
use hplab::qgates::{matrix_power, operator_entanglement, xxz_gate, Gate};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn three_plateau_derivations_agree(q in 2usize..=5, l_a in 1usize..=3, extra in 0usize..=3) {
        let l_d = l_a + extra;
        let a = duc_plateau(q, l_a, l_d).unwrap().value;
        let b = scrambled_plateau_from_strings(q, l_a, l_d).unwrap().value;
        let c = saturation_delta(200, l_a, l_d, q);
        // The string count forms `(1 + x) − 1`, so its error is a few ulp of 1.
        prop_assert!((a - b).abs() <= 1e-15, "{} vs {}", a, b);
        prop_assert!((a - c).abs() <= 1e-13, "{} vs {}", a, c);
    }

    #[test]
    fn perturbed_decay_monotone_in_z1(
        q in 2usize..=4,
        l in (4usize..=30).prop_map(|l| 2 * (l / 2)),
        n_frac in 0.0f64..1.0,
        z_lo in 0.0f64..0.99,
        dz in 0.0f64..0.5,
    ) {
        let n = 1 + ((l / 2 - 1) as f64 * n_frac) as usize;
        let z_hi = (z_lo + dz).min(0.99);
        let lo = perturbed_decay(q, n, l, z_lo).unwrap().value;
        let hi = perturbed_decay(q, n, l, z_hi).unwrap().value;
        prop_assert!(lo >= 0.0);
        prop_assert!(hi >= lo * (1.0 - 1e-12), "n={} L={}: F({})={} > F({})={}", n, l, z_lo, lo, z_hi, hi);
    }
}

#[test]
fn free_point_gives_maximal_error() {
    // With J_z = π/8 the power V^4 is a product gate up to a phase, so the
    // k = 2 interval must sit at q² E_max = q² − 1.
    let g = xxz_gate(FRAC_PI_4, FRAC_PI_4 / 2.0, None).unwrap();
    let v = g.compose(&Gate::swap(2)).unwrap().into_matrix();
    let mut hits = 0;
    for k in 1..=8u32 {
        let e = operator_entanglement(matrix_power(v.view(), 2 * k).view(), 2).unwrap().op_entanglement;
        if e.abs() > 1e-12 {
            continue;
        }
        for l in [8usize, 10, 12] {
            let k = k as usize;
            for t in (2 * k - 1) * l + 1..(2 * k + 1) * l - 1 {
                if is_revival_time(t, l) {
                    continue;
                }
                assert!((integrable_du_delta(&g, t, l).unwrap().value - 3.0).abs() < 1e-12, "t={t} L={l}");
                hits += 1;
            }
        }
    }
    assert!(hits > 0);
}
