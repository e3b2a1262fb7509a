//! Randomized laws for the symbolic layer: ring axioms checked both
//! structurally and by evaluation, substitution as a homomorphism, the
//! parser against the printer, closed forms against plain iteration, and
//! the integer desugaring of comparisons.

use std::collections::BTreeMap;

use accel_core::rat::to_integer;
use accel_core::{
    closed_form_at, compute_closed_form, parse_loop, print_loop, run_n, Assignment, CmpOp,
    Formula, Loop, PolyExp, RunOutcome, SumConfig, Var, VarNames,
};
use num_bigint::BigInt;
use proptest::prelude::*;

#[derive(Debug, Clone)]
enum ExprTree {
    Int(i64),
    Var(u8),
    Exp(u8),
    Add(Box<ExprTree>, Box<ExprTree>),
    Mul(Box<ExprTree>, Box<ExprTree>),
    Neg(Box<ExprTree>),
}

fn build(t: &ExprTree) -> PolyExp {
    match t {
        ExprTree::Int(i) => PolyExp::int(*i),
        ExprTree::Var(2) => PolyExp::var(Var::N),
        ExprTree::Var(v) => PolyExp::var(Var::X(*v as u32)),
        ExprTree::Exp(b) => PolyExp::exp(BigInt::from(*b)),
        ExprTree::Add(a, b) => build(a).add(&build(b)),
        ExprTree::Mul(a, b) => build(a).mul(&build(b)),
        ExprTree::Neg(a) => build(a).neg(),
    }
}

fn expr_tree(vars: u8, with_counter: bool) -> impl Strategy<Value = ExprTree> {
    let top = if with_counter { vars + 1 } else { vars };
    let leaf = prop_oneof![
        4 => (-6i64..=6).prop_map(ExprTree::Int),
        4 => (0..top).prop_map(move |v| ExprTree::Var(if v >= vars { 2 } else { v })),
        if with_counter { 1 } else { 0 } => (2u8..=3).prop_map(ExprTree::Exp),
    ];
    leaf.prop_recursive(3, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| ExprTree::Add(a.into(), b.into())),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| ExprTree::Mul(a.into(), b.into())),
            inner.prop_map(|a| ExprTree::Neg(a.into())),
        ]
    })
}

fn sigma(x0: i64, x1: i64, n: u8) -> Assignment {
    Assignment::new().with(Var::X(0), x0).with(Var::X(1), x1).with_n(i64::from(n))
}

fn states() -> impl Strategy<Value = Vec<(i64, i64, u8)>> {
    proptest::collection::vec((-9i64..=9, -9i64..=9, 0u8..=5), 4)
}

proptest! {
    #[test]
    fn ring_axioms_hold_structurally_and_under_evaluation(
        a in expr_tree(2, true),
        b in expr_tree(2, true),
        c in expr_tree(2, true),
        points in states(),
    ) {
        let (a, b, c) = (build(&a), build(&b), build(&c));
        prop_assert_eq!(a.add(&b), b.add(&a));
        prop_assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
        prop_assert_eq!(a.mul(&b), b.mul(&a));
        prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
        prop_assert_eq!(a.add(&PolyExp::zero()), a.clone());
        prop_assert_eq!(a.mul(&PolyExp::one()), a.clone());
        prop_assert!(a.sub(&a).is_zero());

        for (x0, x1, n) in points {
            let s = sigma(x0, x1, n);
            let (va, vb) = (a.evaluate(&s).unwrap(), b.evaluate(&s).unwrap());
            prop_assert_eq!(a.add(&b).evaluate(&s).unwrap(), va.clone() + vb.clone());
            prop_assert_eq!(a.mul(&b).evaluate(&s).unwrap(), va * vb);
        }
    }

    #[test]
    fn substitution_is_an_identity_respecting_homomorphism(
        a in expr_tree(2, true),
        b in expr_tree(2, true),
        s0 in expr_tree(2, false),
        s1 in expr_tree(2, false),
        points in states(),
    ) {
        let (a, b, s0, s1) = (build(&a), build(&b), build(&s0), build(&s1));

        let identity: BTreeMap<Var, PolyExp> = [
            (Var::X(0), PolyExp::var(Var::X(0))),
            (Var::X(1), PolyExp::var(Var::X(1))),
        ]
        .into();
        prop_assert_eq!(a.subst(&identity).unwrap(), a.clone());

        let map: BTreeMap<Var, PolyExp> = [(Var::X(0), s0.clone()), (Var::X(1), s1.clone())].into();
        prop_assert_eq!(
            a.add(&b).subst(&map).unwrap(),
            a.subst(&map).unwrap().add(&b.subst(&map).unwrap())
        );
        prop_assert_eq!(
            a.mul(&b).subst(&map).unwrap(),
            a.subst(&map).unwrap().mul(&b.subst(&map).unwrap())
        );

        for (x0, x1, n) in points {
            let outer = sigma(x0, x1, n);
            let composed = Assignment::new()
                .with(Var::X(0), to_integer(&s0.evaluate(&outer).unwrap()).unwrap())
                .with(Var::X(1), to_integer(&s1.evaluate(&outer).unwrap()).unwrap())
                .with_n(i64::from(n));
            prop_assert_eq!(
                a.subst(&map).unwrap().evaluate(&outer).unwrap(),
                a.evaluate(&composed).unwrap()
            );
        }
    }
}

fn linear_atom(d: usize) -> impl Strategy<Value = (usize, i64, i64, CmpOp)> {
    (
        0..d,
        prop_oneof![(-3i64..=3).prop_filter("nonzero", |c| *c != 0)],
        -4i64..=4,
        prop_oneof![
            Just(CmpOp::Gt),
            Just(CmpOp::Ge),
            Just(CmpOp::Lt),
            Just(CmpOp::Le),
            Just(CmpOp::Eq),
        ],
    )
}

fn triangular_loop() -> impl Strategy<Value = Loop> {
    (1usize..=3).prop_flat_map(|d| {
        let rows = proptest::collection::vec(
            (1i64..=3, proptest::collection::vec(-3i64..=3, 3), -3i64..=3),
            d,
        );
        let guard = proptest::collection::vec(linear_atom(d), 0..=2);
        (rows, guard).prop_map(move |(rows, guard)| {
            let mut update = Vec::new();
            for (i, (c, lower, konst)) in rows.iter().enumerate() {
                let mut e = PolyExp::var(Var::X(i as u32)).scale(&accel_core::rat::rat(*c, 1));
                for (j, a) in lower.iter().take(i).enumerate() {
                    if *a != 0 {
                        e = e.add(&PolyExp::var(Var::X(j as u32)).scale(&accel_core::rat::rat(*a, 1)));
                    }
                }
                update.push(e.add(&PolyExp::int(*konst)));
            }
            let mut g = Formula::truth();
            for (v, coeff, konst, op) in &guard {
                let lhs = PolyExp::var(Var::X(*v as u32))
                    .scale(&accel_core::rat::rat(*coeff, 1))
                    .add(&PolyExp::int(*konst));
                g.push_cmp(&lhs, *op, &PolyExp::zero());
            }
            Loop { names: VarNames::numbered(d), guard: g, update }
        })
    })
}

proptest! {
    #[test]
    fn printing_and_reparsing_reproduces_the_loop(lp in triangular_loop()) {
        let text = print_loop(&lp);
        let back = parse_loop(&text).unwrap_or_else(|e| panic!("reparse `{text}`: {e}"));
        prop_assert_eq!(back, lp);
    }

    #[test]
    fn closed_forms_track_iteration_and_start_at_identity(
        lp in triangular_loop(),
        starts in proptest::collection::vec(proptest::collection::vec(-10i64..=10, 3), 3),
    ) {
        let cf = compute_closed_form(&lp, &SumConfig::default()).unwrap();

        let at_zero = closed_form_at(&cf, &PolyExp::zero()).unwrap();
        for i in 0..lp.dim() {
            let v = Var::X(i as u32);
            prop_assert_eq!(at_zero.get(&v).unwrap(), &PolyExp::var(v));
        }

        for start in starts {
            let start: Vec<BigInt> = start.into_iter().take(lp.dim()).map(BigInt::from).collect();
            if start.len() < lp.dim() {
                continue;
            }
            let mut state = start.clone();
            for n in 0..=6u64 {
                let symbolic = cf.eval_state(&start, n).unwrap();
                for i in 0..lp.dim() {
                    let value = to_integer(&symbolic[i]);
                    prop_assert_eq!(
                        value.as_ref(),
                        Some(&state[i]),
                        "component {} at n = {}", i, n
                    );
                }
                state = lp.apply(&state).unwrap();
            }
        }
    }

    #[test]
    fn comparison_desugaring_matches_integer_semantics(
        p in expr_tree(2, true),
        q in expr_tree(2, true),
        op in prop_oneof![
            Just(CmpOp::Gt), Just(CmpOp::Ge), Just(CmpOp::Lt), Just(CmpOp::Le), Just(CmpOp::Eq)
        ],
        points in states(),
    ) {
        let (p, q) = (build(&p), build(&q));
        let mut f = Formula::truth();
        f.push_cmp(&p, op, &q);
        for (x0, x1, n) in points {
            let s = sigma(x0, x1, n);
            let (vp, vq) = (p.evaluate(&s).unwrap(), q.evaluate(&s).unwrap());
            let direct = match op {
                CmpOp::Gt => vp > vq,
                CmpOp::Ge => vp >= vq,
                CmpOp::Lt => vp < vq,
                CmpOp::Le => vp <= vq,
                CmpOp::Eq => vp == vq,
            };
            prop_assert_eq!(f.evaluate(&s).unwrap(), direct, "{} {:?} {}", vp, op, vq);
        }
    }

    #[test]
    fn conjunction_evaluates_pointwise_and_partitions_rebuild(
        lp_a in triangular_loop(),
        lp_b in triangular_loop(),
        split in 0usize..=4,
        points in states(),
    ) {
        let (a, b) = (&lp_a.guard, &lp_b.guard);
        let both = a.and(b);
        for (x0, x1, n) in &points {
            let s = sigma(*x0, *x1, *n).with(Var::X(2), 1);
            prop_assert_eq!(
                both.evaluate(&s).unwrap(),
                a.evaluate(&s).unwrap() && b.evaluate(&s).unwrap()
            );
        }

        let clauses = a.clauses();
        let k = split.min(clauses.len());
        let mut rebuilt = Formula::truth();
        for c in clauses[..k].iter().chain(clauses[k..].iter()) {
            rebuilt.push_clause(c.clone());
        }
        for (x0, x1, n) in &points {
            let s = sigma(*x0, *x1, *n).with(Var::X(2), 1);
            prop_assert_eq!(rebuilt.evaluate(&s).unwrap(), a.evaluate(&s).unwrap());
        }
    }

    #[test]
    fn single_steps_run_exactly_when_the_guard_holds(
        lp in triangular_loop(),
        start in proptest::collection::vec(-6i64..=6, 3),
    ) {
        let state: Vec<BigInt> = start.into_iter().take(lp.dim()).map(BigInt::from).collect();
        if state.len() < lp.dim() {
            return Ok(());
        }
        let holds = lp.guard_holds(&state).unwrap();
        match run_n(&lp, &state, 1).unwrap() {
            RunOutcome::Ran(_) => prop_assert!(holds),
            RunOutcome::Blocked { steps, .. } => {
                prop_assert!(!holds);
                prop_assert_eq!(steps, 0);
            }
        }
    }
}
