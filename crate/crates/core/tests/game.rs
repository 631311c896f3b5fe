use ontrack_core::game::*;
use proptest::prelude::*;

/// Regime from the employer's expected payoffs computed in plain floats:
/// high pays 1, pass pays `y(-delta) + 2(1-y)`.
fn direct(delta: f64, y: f64) -> Option<Regime> {
    let high = 1.0;
    let pass = -y * delta + 2.0 * (1.0 - y);
    let gap = high - pass;
    if gap.abs() < 1e-9 {
        None
    } else if gap > 0.0 {
        Some(Regime::High)
    } else {
        Some(Regime::Pass)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn spe_agrees_with_payoff_comparison(delta in 0.0f64..10.0, y in 0.0f64..=1.0) {
        let eq = spe(&GameParams::from_f64(delta, y).unwrap()).unwrap();
        if let Some(expected) = direct(delta, y) {
            prop_assert_eq!(eq.regime, expected);
        }
        let (careful, yolo) = eq.employee_strategy;
        prop_assert_eq!((careful, yolo), (MinimumChoice::Low, MinimumChoice::Low));
        let best = employer_expected_payoff(EmployerAction::High, &GameParams::from_f64(delta, y).unwrap())
            .max(employer_expected_payoff(EmployerAction::Pass, &GameParams::from_f64(delta, y).unwrap()));
        prop_assert!((eq.employer_value - best).abs() < 1e-12);
    }

    #[test]
    fn threshold_decreases_in_y(a in 0.01f64..0.99, step in 1e-6f64..0.5) {
        let b = (a + step).min(1.0);
        let ta = delta_threshold(&Rational::from_f64(a).unwrap()).unwrap();
        let tb = delta_threshold(&Rational::from_f64(b).unwrap()).unwrap();
        prop_assert!(tb.inner() < ta.inner());
    }
}

#[test]
fn worked_cases() {
    let case = |d: &str, y: &str| spe(&GameParams::new(d.parse().unwrap(), y.parse().unwrap()).unwrap()).unwrap();
    assert_eq!(case("1", "0.4").regime, Regime::High);
    assert_eq!(case("1", "0.2").regime, Regime::Pass);
    let mixed = case("0", "0.5");
    assert_eq!(mixed.regime, Regime::Mixed);
    assert_eq!(mixed.q_range, (0.0, 1.0));
    assert_eq!(case("0", "1/3").regime, Regime::Pass);
    assert_eq!(case("1", "1/3").regime, Regime::Mixed);
}

#[test]
fn sweep_grid_is_row_major() {
    let deltas = linspace(&Rational::new(0, 1), &Rational::new(2, 1), 4);
    let ys = linspace(&Rational::new(0, 1), &Rational::new(1, 1), 10);
    let grid = sweep(&deltas, &ys).unwrap();
    assert_eq!(grid.len(), 5 * 11);
    assert_eq!((grid[11].delta, grid[11].y), (0.5, 0.0));
    assert!(grid.iter().filter(|p| p.y == 0.0).all(|p| p.regime == Regime::Pass));
    assert!(grid.iter().filter(|p| p.y == 1.0).all(|p| p.regime == Regime::High));
}
