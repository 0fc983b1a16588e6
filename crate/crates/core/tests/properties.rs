use std::sync::Arc;

use cansub_core::cansub::{slack, solve_canonical_from};
use cansub_core::matrix::smith_form;
use cansub_core::points::{
    enumerate_points, gram_invertible, lower_breaks, pairing_gram, PairingTarget, PointSet,
};
use cansub_core::rational::{q, qi};
use cansub_core::{
    duality_check, gen_bt1, solve_canonical, verify_frobenius_kernel, Field, FieldRegistry, GenSpec, KisinModule,
    PointOptions, PuiseuxSeries, SeriesMatrix, TruncSeries, Q,
};
use proptest::prelude::*;

fn field(p: u32) -> Arc<Field> {
    Arc::new(Field::prime(p).unwrap())
}

fn series(f: &Arc<Field>, shift: usize, coeffs: &[i64], prec: usize) -> TruncSeries {
    TruncSeries::from_ints(f, coeffs, prec).shift(shift).truncate(prec)
}

fn prime() -> impl Strategy<Value = u32> {
    prop_oneof![Just(3u32), Just(5), Just(7)]
}

fn coeffs(n: usize) -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(0i64..7, 1..n)
}

/// A random unit matrix `P L U` built from polynomial entries.
fn unit_matrix(f: &Arc<Field>, n: usize, entries: &[Vec<i64>], prec: usize) -> SeriesMatrix {
    let mut k = 0;
    let mut next = || {
        let c = entries[k % entries.len()].clone();
        k += 1;
        TruncSeries::from_ints(f, &c, prec)
    };
    let lower = SeriesMatrix::from_fn(f, n, n, |i, j| {
        if i == j {
            TruncSeries::one(f, prec)
        } else if i > j {
            next()
        } else {
            TruncSeries::zero(f, prec)
        }
    });
    let upper = SeriesMatrix::from_fn(f, n, n, |i, j| {
        if i == j {
            TruncSeries::one(f, prec)
        } else if i < j {
            next()
        } else {
            TruncSeries::zero(f, prec)
        }
    });
    lower.mul(&upper)
}

fn bt1_spec() -> impl Strategy<Value = GenSpec> {
    (prop_oneof![Just(3u32), Just(5)], 2usize..=6, 2usize..=3, any::<u64>())
        .prop_flat_map(|(p, e, h, seed)| {
            let max_k = (0..e).filter(|&k| q(k as i128, e as i128) < q(p as i128, p as i128 + 1)).max().unwrap();
            (Just(p), Just(e), Just(h), 1..h, 0..=max_k, Just(seed))
        })
        .prop_map(|(p, e, h, d, k, seed)| GenSpec {
            p,
            m: 1,
            e,
            h,
            d,
            w: q(k as i128, e as i128),
            seed,
            precision: 4 * e * p as usize,
            triangular_hint: false,
        })
}

fn spec_below_half() -> impl Strategy<Value = GenSpec> {
    bt1_spec().prop_filter("w < 1/2", |s| s.w < q(1, 2)).prop_map(|mut s| {
        s.precision = 24 * s.e;
        s
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frobenius_is_a_ring_homomorphism(p in prime(), a in coeffs(12), b in coeffs(12), sa in 0usize..4, sb in 0usize..4) {
        let f = field(p);
        let (s, t) = (series(&f, sa, &a, 20), series(&f, sb, &b, 20));
        let n = 20 * p as usize;
        prop_assert!(s.mul(&t).frobenius().eq_mod(&s.frobenius().mul(&t.frobenius()), n));
        prop_assert!(s.add(&t).frobenius().eq_mod(&s.frobenius().add(&t.frobenius()), n));
    }

    #[test]
    fn pth_root_inverts_frobenius(p in prime(), terms in prop::collection::vec((0i128..40, 1i128..9, 1i64..7), 1..8)) {
        let f = field(p);
        let prec = qi(6);
        let s = terms.iter().fold(PuiseuxSeries::zero(&f, prec), |acc, &(n, d, c)| {
            acc.add(&PuiseuxSeries::monomial(&f, f.from_i64(c), q(n, d), prec))
        });
        let back = s.frob_pow(1).pth_root();
        prop_assert!(back.eq_mod(&s, prec));
        prop_assert_eq!(back.prec(), prec);
    }

    #[test]
    fn valuation_is_additive(p in prime(), a in coeffs(10), b in coeffs(10), sa in 0usize..5, sb in 0usize..5) {
        let f = field(p);
        let (s, t) = (series(&f, sa, &a, 30), series(&f, sb, &b, 30));
        if let (Some(vs), Some(vt)) = (s.valuation(), t.valuation()) {
            prop_assert_eq!(s.mul(&t).valuation(), Some(vs + vt));
        }
    }

    #[test]
    fn unit_inverse(p in prime(), a in coeffs(10), c0 in 1i64..7) {
        let f = field(p);
        let mut a = a;
        a[0] = c0 % p as i64;
        prop_assume!(a[0] != 0);
        let s = TruncSeries::from_ints(&f, &a, 25);
        let prod = s.mul(&s.inverse().unwrap());
        prop_assert!(prod.eq_mod(&TruncSeries::one(&f, 25), 25));
    }

    #[test]
    fn smith_recomposition(p in prime(), entries in prop::collection::vec(coeffs(4), 6), ks in prop::collection::vec(0usize..5, 3), n in 2usize..=3) {
        let f = field(p);
        let prec = 40;
        let ks = &ks[..n];
        let left = unit_matrix(&f, n, &entries, prec);
        let right = unit_matrix(&f, n, &entries[1..], prec);
        let m = left.mul(&SeriesMatrix::diag_powers(&f, ks, prec)).mul(&right);
        let s = smith_form(&m).unwrap();
        let mut sorted = ks.to_vec();
        sorted.sort();
        prop_assert_eq!(&s.d, &sorted);
        let diag = SeriesMatrix::diag_powers(&f, &s.d, prec);
        let k = prec - sorted.iter().sum::<usize>();
        prop_assert!(s.u.mul(&m).mul(&s.v).eq_mod(&diag, k));
        prop_assert_eq!(s.d.iter().sum::<usize>(), m.det().valuation().unwrap());
    }

    #[test]
    fn phi_twist_respects_products_and_inverses(p in prime(), entries in prop::collection::vec(coeffs(4), 4), other in prop::collection::vec(coeffs(4), 4)) {
        let f = field(p);
        let prec = 30;
        let m = unit_matrix(&f, 2, &entries, prec);
        let n = SeriesMatrix::from_fn(&f, 2, 2, |i, j| TruncSeries::from_ints(&f, &other[2 * i + j], prec));
        prop_assert!(m.mul(&n).phi_twist().eq_mod(&m.phi_twist().mul(&n.phi_twist()), prec));
        let inv = m.inverse_unit().unwrap();
        prop_assert!(inv.phi_twist().eq_mod(&m.phi_twist().inverse_unit().unwrap(), prec));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_modules_have_their_invariants(spec in bt1_spec()) {
        let m = gen_bt1(&spec).unwrap();
        prop_assert_eq!(m.validate_bt1().unwrap(), (true, spec.d));
        prop_assert_eq!(m.degree().unwrap(), qi(spec.d as i128));
        prop_assert_eq!(m.hodge_height().unwrap(), spec.w);
        prop_assert_eq!(gen_bt1(&spec).unwrap(), m);
    }

    #[test]
    fn degree_invariants(spec in bt1_spec()) {
        let m = gen_bt1(&spec).unwrap();
        prop_assert_eq!(m.degree().unwrap(), m.degree_from_divisors().unwrap());
        let dual = m.dual().unwrap();
        prop_assert_eq!(m.degree().unwrap() + dual.degree().unwrap(), qi(spec.h as i128));
        prop_assert_eq!(dual.validate_bt1().unwrap(), (true, spec.h - spec.d));
    }

    #[test]
    fn hodge_height_is_invariant(spec in bt1_spec(), entries in prop::collection::vec(coeffs(3), 9)) {
        let m = gen_bt1(&spec).unwrap();
        let w = m.hodge_height().unwrap();
        let u = unit_matrix(m.field(), spec.h, &entries, m.prec());
        prop_assert_eq!(m.base_change(&u).unwrap().hodge_height().unwrap(), w);
        prop_assert_eq!(m.dual().unwrap().hodge_height().unwrap(), w);
    }

    #[test]
    fn dual_is_an_involution(spec in bt1_spec()) {
        let m = gen_bt1(&spec).unwrap();
        let back = m.dual().unwrap().dual().unwrap();
        prop_assert!(back.prec() >= m.prec() - spec.e * 2);
        prop_assert!(back.matrix().eq_mod(m.matrix(), back.prec()));
        prop_assert_eq!(back.cbar0(), m.cbar0());
    }

    #[test]
    fn canonical_solution_is_unique_and_dual(spec in bt1_spec(), start in prop::collection::vec(coeffs(5), 16)) {
        let m = gen_bt1(&spec).unwrap();
        let res = solve_canonical(&m).unwrap();
        let (e, p) = (qi(spec.e as i128), qi(spec.p as i128));
        prop_assert_eq!(qi(res.d_matrix.det().valuation().unwrap() as i128), e * spec.w);
        prop_assert!(verify_frobenius_kernel(&res, &m, qi(1) - spec.w).unwrap());
        let gamma = e * p * (qi(1) - spec.w) - e * spec.w;
        prop_assert!(qi(res.iterations as i128) <= qi(m.prec() as i128) / gamma + qi(2));
        let f = m.field();
        let b0 = SeriesMatrix::from_fn(f, res.b.rows(), res.b.cols(), |i, j| {
            TruncSeries::from_ints(f, &start[(i * res.b.cols() + j) % start.len()], res.b.prec())
        });
        let other = solve_canonical_from(&m, Some(&b0)).unwrap();
        prop_assert!(other.b.eq_mod(&res.b, m.prec() - slack(&m)));
        prop_assert!(duality_check(&m).unwrap());
    }
}

fn points(m: &KisinModule, reg: &mut FieldRegistry) -> PointSet {
    enumerate_points(m, &PointOptions::default(), reg).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn lower_breaks_respect_the_degree_bound(spec in spec_below_half()) {
        let m = gen_bt1(&spec).unwrap();
        let mut reg = FieldRegistry::new(m.field().clone());
        let ps = points(&m, &mut reg);
        prop_assert_eq!(ps.len(), (spec.p as usize).pow(spec.h as u32));
        let rep = lower_breaks(&ps).unwrap();
        let bound = m.degree().unwrap() / qi(spec.p as i128 - 1);
        prop_assert!(rep.breaks.iter().all(|(v, _)| *v <= bound));
        prop_assert_eq!(rep.breaks.iter().map(|(_, n)| n).sum::<usize>(), ps.len() - 1);
    }

    #[test]
    fn pairing_is_nondegenerate(spec in spec_below_half()) {
        let m = gen_bt1(&spec).unwrap();
        let mut reg = FieldRegistry::new(m.field().clone());
        let ps = points(&m, &mut reg);
        let dps = points(&m.dual().unwrap(), &mut reg);
        let target = PairingTarget::new(&m, &mut reg).unwrap();
        let (ps, dps, target) = (ps.lift(&reg).unwrap(), dps.lift(&reg).unwrap(), target.lift(&reg).unwrap());
        let gram = pairing_gram(&target, &ps, &dps);
        // an undecidable pairing is an inconclusive case, not a counterexample
        match gram_invertible(&gram, spec.p) {
            Ok(ok) => prop_assert!(ok),
            Err(_) => prop_assume!(false),
        }
    }

    #[test]
    fn rank_one_breaks(p in prop_oneof![Just(3u32), Just(5)], e in 1usize..=6, s in 0usize..=6) {
        let s = s.min(e);
        let f = field(p);
        let m = KisinModule::with_default_cbar0(&f, e, SeriesMatrix::diag_powers(&f, &[s], 24 * e)).unwrap();
        let mut reg = FieldRegistry::new(f.clone());
        let rep = lower_breaks(&points(&m, &mut reg)).unwrap();
        let expected: Q = q(s as i128, (e * (p as usize - 1)) as i128);
        prop_assert_eq!(rep.breaks, vec![(expected, p as usize - 1)]);
    }
}
