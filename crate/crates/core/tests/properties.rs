//! Property tests for the oracle closed forms, the extended duality gap and
//! the direction/factorization invariants.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use srdkit::maxdet::{
    gap_info, newton_direction, nt_point, BlockDiag, BlockSpec, EqRow, Layout, MaxDetProblem,
};
use srdkit::oracles::{
    reverse_waterfill_hard, reverse_waterfill_soft, scalar_memoryless_rd, scalar_stationary_srd,
};
use srdkit::synthesis::factor_snr;

fn spd_from(values: &[f64], n: usize, ridge: f64) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |i, j| values[(i * n + j) % values.len()]);
    &g * g.transpose() + DMatrix::identity(n, n) * ridge
}

proptest! {
    /// Soft and hard water-filling agree when the hard bound equals the soft
    /// solution's distortion.
    #[test]
    fn waterfill_soft_hard_consistency(
        sigma2 in proptest::collection::vec(0.0f64..5.0, 1..7),
        alpha in 0.05f64..20.0,
    ) {
        let soft = reverse_waterfill_soft(&sigma2, alpha);
        prop_assume!(soft.distortion > 0.0);
        let hard = reverse_waterfill_hard(&sigma2, soft.distortion);
        for (a, b) in soft.levels.iter().zip(&hard.levels) {
            prop_assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        prop_assert!((soft.rate_nats - hard.rate_nats).abs() < 1e-12);
    }

    /// Oracle rates are nonnegative and monotone in their arguments.
    #[test]
    fn oracle_rates_monotone(
        a in 0.0f64..2.0,
        w in 0.1f64..3.0,
        d1 in 0.01f64..10.0,
        scale in 1.0f64..4.0,
    ) {
        let d2 = d1 * scale;
        let r1 = scalar_stationary_srd(a, w, d1);
        let r2 = scalar_stationary_srd(a, w, d2);
        prop_assert!(r1 >= 0.0 && r2 >= 0.0);
        prop_assert!(r2 <= r1 + 1e-12, "rate must not increase in D");
        prop_assert!(scalar_memoryless_rd(d2) <= scalar_memoryless_rd(d1) + 1e-12);
        // Soft rate is nondecreasing in alpha.
        let s1 = reverse_waterfill_soft(&[1.0, 2.0, 0.5], 1.0 / d1.max(0.05));
        let s2 = reverse_waterfill_soft(&[1.0, 2.0, 0.5], 2.0 / d1.max(0.05));
        prop_assert!(s2.rate_nats >= s1.rate_nats - 1e-12);
    }

    /// On exact central-path points the extended gap returns nu itself.
    /// (At least one block must sit below nu, otherwise the inner product is
    /// already at the weighted floor and the gap is undefined.)
    #[test]
    fn gap_equals_nu_on_central_path(
        nu in 0.001f64..5.0,
        weights in proptest::collection::vec(0.0f64..2.0, 1..5),
        scale in 0.2f64..4.0,
    ) {
        let mut weights = weights;
        weights[0] = 0.0;
        let blocks: Vec<BlockSpec> = weights
            .iter()
            .enumerate()
            .map(|(i, &w)| BlockSpec { size: 1 + (i % 3), weight: w })
            .collect();
        let x = BlockDiag {
            blocks: blocks
                .iter()
                .map(|b| DMatrix::identity(b.size, b.size) * scale)
                .collect(),
        };
        let z = BlockDiag {
            blocks: blocks
                .iter()
                .map(|b| DMatrix::identity(b.size, b.size) * (b.weight.max(nu) / scale))
                .collect(),
        };
        let info = gap_info(&x, &z, &blocks).unwrap();
        prop_assert!((info.mu - nu).abs() <= 1e-12 * nu.max(1.0), "mu {} nu {nu}", info.mu);
    }

    /// SNR factorization reconstructs its input within tolerance for random
    /// PSD matrices of every rank.
    #[test]
    fn factor_snr_reconstructs(
        values in proptest::collection::vec(-2.0f64..2.0, 9),
        rank in 0usize..4,
    ) {
        let n = 3;
        let g = DMatrix::from_fn(n, rank, |i, j| values[(i * rank + j.max(1) * 3) % values.len()]);
        let snr = &g * g.transpose();
        let (c, v, r) = factor_snr(&snr, 1e-9).unwrap();
        prop_assert!(r <= rank.min(n));
        let rebuilt = if r == 0 {
            DMatrix::zeros(n, n)
        } else {
            c.transpose() * v.clone().try_inverse().unwrap() * &c
        };
        let err = srdkit::linalg::frob_norm(&(&rebuilt - &snr));
        prop_assert!(
            err <= 1e-8 * (1.0 + srdkit::linalg::frob_norm(&snr)),
            "reconstruction error {err}"
        );
    }

    /// The scaled Newton direction is symmetric and satisfies its linearized
    /// equality constraints on random strictly feasible states.
    #[test]
    fn newton_direction_linear_feasibility(
        xv in proptest::collection::vec(-1.0f64..1.0, 4),
        zv in proptest::collection::vec(-1.0f64..1.0, 4),
        target in 0.1f64..2.0,
        rhs in 0.5f64..4.0,
    ) {
        let x_b = spd_from(&xv, 2, 1.0);
        let z_b = spd_from(&zv, 2, 1.0);
        let mut p = MaxDetProblem::new(
            vec![BlockSpec { size: 2, weight: 1.0 }],
            vec![DMatrix::identity(2, 2)],
        );
        let mut row = EqRow::new();
        row.add_entry(0, 2, 0, 0, 1.0);
        row.add_entry(0, 2, 1, 1, 1.0);
        p.push_row(row, rhs);
        let layout = Layout::build(&p);
        let x = BlockDiag { blocks: vec![x_b.clone()] };
        let z = BlockDiag { blocks: vec![z_b.clone()] };
        let y = DVector::from_vec(vec![0.1]);
        let g = vec![nt_point(&x_b, &z_b).unwrap().g];
        let dir = newton_direction(&p, &layout, &x, &y, &z, &g, &[target]).unwrap();

        // Symmetry to 1e-12.
        for m in [&dir.dx.blocks[0], &dir.dz.blocks[0]] {
            prop_assert!((m[(0, 1)] - m[(1, 0)]).abs() <= 1e-12);
        }
        // A(X + dX) = b.
        let ax = p.apply_a(&x.axpy(1.0, &dir.dx))[0];
        prop_assert!((ax - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()), "A(X+dX) = {ax}");
        // A*(y + dy) + (Z + dZ) = C.
        let ynew = &y + &dir.dy;
        let aty = p.apply_at(&ynew);
        let resid = &p.cost[0] - &aty.blocks[0] - &z.blocks[0] - &dir.dz.blocks[0];
        prop_assert!(srdkit::linalg::frob_norm(&resid) <= 1e-9);
    }
}
