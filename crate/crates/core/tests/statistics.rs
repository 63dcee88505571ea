mod common;

use common::{normal, paired_t_by_definition, seeded, t_p_value_by_quadrature};
use facegame::statlab::{
    ln_gamma, paired_t_test, regularized_incomplete_beta, student_t_two_sided, StatError,
};

const T_GRID: [f64; 4] = [0.1, 1.0, 2.61, 5.0];
const DF_GRID: [usize; 4] = [2, 10, 107, 215];

#[test]
fn p_values_match_quadrature_over_the_grid() {
    for df in DF_GRID {
        for t in T_GRID {
            let oracle = t_p_value_by_quadrature(t, df as f64);
            for signed in [t, -t] {
                let p = student_t_two_sided(signed, df as f64);
                assert!(
                    (p - oracle).abs() < 1e-9,
                    "t={signed} df={df}: {p} vs {oracle}"
                );
            }
        }
    }
}

#[test]
fn quadrature_oracle_agrees_with_closed_forms() {
    // df = 1 is the Cauchy law and df = 2 has an algebraic tail.
    for t in T_GRID {
        let cauchy = 1.0 - 2.0 * t.atan() / std::f64::consts::PI;
        assert!((t_p_value_by_quadrature(t, 1.0) - cauchy).abs() < 1e-12);
        let two = 1.0 - t / (2.0 + t * t).sqrt();
        assert!((t_p_value_by_quadrature(t, 2.0) - two).abs() < 1e-12);
    }
}

/// Paired samples of `n` whose differences have mean `shift`.
fn paired_samples(n: usize, shift: f64, rng: &mut impl rand::Rng) -> (Vec<f64>, Vec<f64>) {
    let a: Vec<f64> = (0..n).map(|_| 0.4 + 0.2 * normal(rng)).collect();
    let b = a.iter().map(|x| x + shift + 0.2 * normal(rng)).collect();
    (a, b)
}

#[test]
fn t_statistic_and_p_from_data_match_the_oracle() {
    let mut rng = seeded(17);
    for df in DF_GRID {
        let (a, b) = paired_samples(df + 1, 0.03, &mut rng);
        let r = paired_t_test(&a, &b).unwrap();
        assert_eq!(r.df, df);
        assert_eq!(r.n, df + 1);
        let t = paired_t_by_definition(&a, &b);
        assert!(
            (r.t - t).abs() < 1e-9 * t.abs().max(1.0),
            "t {} vs {t}",
            r.t
        );
        assert!((r.p - t_p_value_by_quadrature(t, df as f64)).abs() < 1e-9);
    }
}

#[test]
fn known_effect_is_detected_at_n_100() {
    let mut rng = seeded(2024);
    let significant = (0..100)
        .filter(|_| {
            let (a, b) = paired_samples(100, 0.1, &mut rng);
            paired_t_test(&a, &b).unwrap().p < 0.05
        })
        .count();
    assert!(significant >= 95, "{significant}/100");
}

#[test]
fn null_effect_rejects_at_about_the_nominal_rate() {
    let mut rng = seeded(7);
    let rejections = (0..400)
        .filter(|_| {
            let (a, b) = paired_samples(30, 0.0, &mut rng);
            paired_t_test(&a, &b).unwrap().p < 0.05
        })
        .count();
    // Binomial(400, 0.05) has mean 20 and sd ~4.4.
    assert!((5..=38).contains(&rejections), "{rejections}/400");
}

#[test]
fn special_functions() {
    // Γ(n) = (n-1)!, Γ(1/2) = √π.
    let mut fact = 1.0f64;
    for n in 1..20 {
        assert!((ln_gamma(n as f64) - fact.ln()).abs() < 1e-12 * fact.ln().abs().max(1.0));
        fact *= n as f64;
    }
    assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
    // I_x(a, 1) = x^a and I_x(1, b) = 1 - (1 - x)^b.
    for x in [0.0, 0.1, 0.5, 0.93, 1.0] {
        assert!((regularized_incomplete_beta(x, 3.5, 1.0) - x.powf(3.5)).abs() < 1e-13);
        assert!(
            (regularized_incomplete_beta(x, 1.0, 2.5) - (1.0 - (1.0 - x).powf(2.5))).abs() < 1e-13
        );
    }
}

#[test]
fn degenerate_inputs_are_errors() {
    assert_eq!(
        paired_t_test(&[1.0], &[2.0]),
        Err(StatError::TooFewPairs(1))
    );
    assert_eq!(
        paired_t_test(&[1.0, 2.0], &[2.0]),
        Err(StatError::LengthMismatch(2, 1))
    );
    assert_eq!(
        paired_t_test(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]),
        Err(StatError::DegenerateVariance)
    );
}
