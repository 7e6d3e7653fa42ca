//! Property tests for the expression grammar: printing round-trips through
//! the parser, and the symbolic derivative agrees with finite differences.

use levyinv::expr::Expr;
use proptest::prelude::*;

/// Random expression trees over the smooth part of the grammar (integer
/// powers only, so derivatives stay defined everywhere we sample).
fn expr_strategy() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-4.0f64..4.0).prop_map(Expr::Num),
        (-9i32..=9).prop_map(|k| Expr::Num(k as f64)),
        Just(Expr::parse("x").unwrap()),
    ];
    // compose via the parser so only representable shapes appear
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Expr::parse(&format!("({a})+({b})")).unwrap()),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Expr::parse(&format!("({a})-({b})")).unwrap()),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Expr::parse(&format!("({a})*({b})")).unwrap()),
            (inner.clone(), 1u32..=3)
                .prop_map(|(a, k)| Expr::parse(&format!("({a})^{k}")).unwrap()),
            inner.clone().prop_map(|a| Expr::parse(&format!("sin({a})")).unwrap()),
            inner.clone().prop_map(|a| Expr::parse(&format!("cos({a})")).unwrap()),
            inner.clone().prop_map(|a| Expr::parse(&format!("tanh({a})")).unwrap()),
            inner.clone().prop_map(|a| Expr::parse(&format!("exp(min({a}, 4))")).unwrap()),
            inner.prop_map(|a| Expr::parse(&format!("0-({a})")).unwrap()),
        ]
    })
}

proptest! {
    #[test]
    fn printing_round_trips(e in expr_strategy(), x in -3.0f64..3.0) {
        let printed = e.to_string();
        let back = Expr::parse(&printed)
            .unwrap_or_else(|err| panic!("reparse of `{printed}`: {err}"));
        let (a, b) = (e.eval(x), back.eval(x));
        prop_assert!(
            a == b || (a.is_nan() && b.is_nan()),
            "`{printed}` at {x}: {a} vs {b}"
        );
    }

    #[test]
    fn second_print_is_fixed_point(e in expr_strategy()) {
        let once = e.to_string();
        let twice = Expr::parse(&once).unwrap().to_string();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn derivative_matches_finite_difference(e in expr_strategy(), x in -2.0f64..2.0) {
        let d = e.differentiate();
        let h = 1e-5 * (1.0 + x.abs());
        let samples: Vec<f64> = [-2.0, -1.0, 1.0, 2.0]
            .iter()
            .map(|k| e.eval(x + k * h))
            .collect();
        let sym = d.eval(x);
        prop_assume!(sym.is_finite() && samples.iter().all(|v| v.is_finite()));
        prop_assume!(sym.abs() < 1e6 && samples.iter().all(|v| v.abs() < 1e6));
        // fourth-order central stencil; O(h⁴ f⁽⁵⁾) error
        let stencil = |h: f64| {
            (e.eval(x - 2.0 * h) - 8.0 * e.eval(x - h) + 8.0 * e.eval(x + h)
                - e.eval(x + 2.0 * h))
                / (12.0 * h)
        };
        let (fd, fd2) = (stencil(h), stencil(0.5 * h));
        let scale = 1.0 + sym.abs() + samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // skip points where the stencil itself has not converged (wild
        // high-order derivatives from deeply nested trig/exp chains)
        prop_assume!((fd - fd2).abs() <= 1e-6 * scale);
        prop_assert!(
            (sym - fd2).abs() <= 1e-3 * scale,
            "`{}` at {x}: symbolic {sym}, stencil {fd2}",
            e
        );
    }
}
