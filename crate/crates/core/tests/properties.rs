use covsteer_core::linalg::{self, Mat};
use covsteer_core::montecarlo::covariance_ode;
use covsteer_core::riccati::{existence_condition, RiccatiSolution};
use covsteer_core::scenario::{ChannelSpec, LawSpec, NoiseBlock, ProblemBlock, ScheduleSpec, SystemBlock};
use covsteer_core::steering::{boundary_map, propagate_covariance, solve_pi0, BoundaryMapWorkspace};
use covsteer_core::{
    ControlLaw, FeedbackLaw, GramianTable, JumpChannel, JumpLaw, LtvSystem, MatrixSchedule, NoiseComponent, NoiseSpec,
    Scenario, SolveOptions, SteeringProblem, Vector,
};
use proptest::prelude::*;

/// `A = A0 + A1 t`, `B = I + 0.3 B1 t` (invertible on [0, 1]), `C = I`,
/// Wiener plus one jump channel per coordinate.
fn system(n: usize, c: &[f64]) -> LtvSystem {
    let m = |off: usize, scale: f64| -> Vec<Vec<Vec<f64>>> {
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let k = off + 2 * (i * n + j);
                        let id = if scale > 0.0 && i == j { 1.0 } else { 0.0 };
                        if scale > 0.0 {
                            vec![id, scale * c[k]]
                        } else {
                            vec![c[k], c[k + 1]]
                        }
                    })
                    .collect()
            })
            .collect()
    };
    let a = MatrixSchedule::polynomial(m(0, 0.0)).unwrap();
    let b = MatrixSchedule::polynomial(m(18, 0.3)).unwrap();
    let channels = (0..n)
        .map(|i| {
            JumpChannel::new(
                MatrixSchedule::scalar_polynomial(vec![1.0 + c[36 + i].abs(), 0.5]),
                JumpLaw::Normal { mean: 0.3 * c[39 + i], std_dev: 0.2 },
            )
            .unwrap()
        })
        .collect();
    let noise = NoiseSpec::new(
        n,
        vec![
            NoiseComponent::Wiener { scale: Mat::from_fn(n, n, |i, j| if i == j { 0.5 + 0.3 * c[42 + i] } else { 0.0 }) },
            NoiseComponent::CompoundPoisson { channels, compensated: false },
        ],
    )
    .unwrap();
    LtvSystem::new(a, b, MatrixSchedule::identity(n), MatrixSchedule::identity(n), noise).unwrap()
}

fn sym(n: usize, c: &[f64], scale: f64) -> Mat {
    let m = Mat::from_fn(n, n, |i, j| c[i * n + j]);
    (&m + m.transpose()) * (0.5 * scale)
}

fn spd(n: usize, c: &[f64]) -> Mat {
    let l = Mat::from_fn(n, n, |i, j| c[i * n + j]);
    &l * l.transpose() + Mat::identity(n, n) * 0.3
}

/// Shrink `pi` toward 0 until its existence margin at `s` is at least `margin`.
fn feasible(table: &GramianTable, mut pi: Mat, s: f64, margin: f64) -> Mat {
    while existence_condition(table, &pi, s).margin < margin {
        pi *= 0.5;
    }
    pi
}

fn coefs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn transition_semigroup_and_gramian_additivity(n in 1usize..=3, c in coefs(), r in 0.0f64..1.0, s in 0.0f64..1.0, t in 0.0f64..1.0) {
        let sys = system(n, &c);
        let table = GramianTable::new(&sys).unwrap();
        let lhs = table.transition(t, s) * table.transition(s, r);
        prop_assert!((lhs - table.transition(t, r)).amax() < 1e-9);
        // N(t, r) = N(s, r) + Phi(r, s) N(t, s) Phi(r, s)^T
        let phi_rs = table.transition(r, s);
        let rhs = table.gramian(s, r) + &phi_rs * table.gramian(t, s) * phi_rs.transpose();
        prop_assert!((table.gramian(t, r) - rhs).amax() < 1e-9);
    }

    #[test]
    fn closed_form_satisfies_the_riccati_equation(n in 1usize..=3, c in coefs(), s in 0.0f64..1.0, t in 0.01f64..0.99) {
        let sys = system(n, &c);
        let table = GramianTable::new(&sys).unwrap();
        let pi_s = feasible(&table, sym(n, &c[45..], 2.0), s, 0.05);
        let sol = RiccatiSolution::feasible(&table, pi_s, s).unwrap();
        let h = 1e-5;
        let deriv = (sol.eval(t + h).unwrap() - sol.eval(t - h).unwrap()) / (2.0 * h);
        let pi = sol.eval(t).unwrap();
        let a = sys.a().eval(t);
        let rhs = -(a.transpose() * &pi) - &pi * &a + &pi * sys.control_weight(t) * &pi;
        prop_assert!((deriv - &rhs).amax() < 1e-5 * (1.0 + rhs.amax()));
    }

    #[test]
    fn existence_bound_is_preserved_along_the_flow(n in 1usize..=3, c in coefs(), s in 0.0f64..1.0, t in 0.0f64..1.0) {
        let sys = system(n, &c);
        let table = GramianTable::new(&sys).unwrap();
        let pi_s = feasible(&table, sym(n, &c[45..], 3.0), s, 1e-3);
        let sol = RiccatiSolution::feasible(&table, pi_s, s).unwrap();
        let pi_t = sol.eval(t).unwrap();
        prop_assert!(existence_condition(&table, &pi_t, t).feasible);
    }

    #[test]
    fn bracket_is_positive_definite(n in 1usize..=3, c in coefs()) {
        let sys = system(n, &c);
        let sigma0 = spd(n, &c[45..]);
        let ws = BoundaryMapWorkspace::new(&sys, &sigma0).unwrap();
        let pi0 = feasible(ws.table(), sym(n, &c[54..], 2.0), 0.0, 0.01);
        let level = ws.map(&pi0).unwrap().level;
        let s = ws.jacobian_bracket(&pi0, level).unwrap();
        prop_assert!(linalg::min_eigenvalue(&linalg::symmetrize(&s)) > 0.0);
    }

    #[test]
    fn scalar_map_is_strictly_decreasing(c in coefs(), lo in -20.0f64..0.0) {
        let sys = system(1, &c);
        let sigma0 = spd(1, &c[45..]);
        let ws = BoundaryMapWorkspace::new(&sys, &sigma0).unwrap();
        let top = feasible(ws.table(), Mat::from_element(1, 1, 10.0), 0.0, 1e-3)[(0, 0)];
        prop_assume!(top > lo);
        let values: Vec<f64> = (0..=20)
            .map(|k| {
                let pi = lo + (top - lo) * k as f64 / 20.0;
                ws.map(&Mat::from_element(1, 1, pi)).unwrap().sigma1[(0, 0)]
            })
            .collect();
        prop_assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
    }

    #[test]
    fn solve_inverts_the_map(n in 1usize..=3, c in coefs()) {
        let sys = system(n, &c);
        let sigma0 = spd(n, &c[45..]);
        let table = GramianTable::new(&sys).unwrap();
        let pi0 = feasible(&table, sym(n, &c[54..], 2.0), 0.0, 0.05);
        let sigma1 = boundary_map(&sys, &sigma0, &pi0).unwrap();
        let prob = SteeringProblem::new(Vector::zeros(n), sigma0, Vector::zeros(n), sigma1).unwrap();
        let (got, trace) = solve_pi0(&sys, &prob, &SolveOptions::default()).unwrap();
        prop_assert!(trace.converged);
        prop_assert!((got - pi0).amax() < 1e-7);
    }

    #[test]
    fn covariance_ode_agrees_with_closed_loop_formula(n in 1usize..=3, c in coefs(), t in 0.05f64..1.0) {
        let sys = system(n, &c);
        let sigma0 = spd(n, &c[45..]);
        let table = GramianTable::new(&sys).unwrap();
        let pi0 = feasible(&table, sym(n, &c[54..], 2.0), 0.0, 0.05);
        let law = ControlLaw::new(&sys, &pi0, &Vector::zeros(n), &Vector::zeros(n)).unwrap();
        let ode = covariance_ode(&sys, &law, &sigma0).unwrap().eval(t);
        let closed = propagate_covariance(&sys, &pi0, &sigma0, t).unwrap();
        prop_assert!((ode - closed).amax() < 1e-6);
    }

    #[test]
    fn feedforward_does_not_touch_the_covariance(n in 1usize..=3, c in coefs()) {
        struct NoFeedforward<'a>(&'a ControlLaw);
        impl FeedbackLaw for NoFeedforward<'_> {
            fn gain(&self, t: f64) -> Mat {
                self.0.gain(t)
            }
            fn feedforward(&self, _: f64) -> Vector {
                Vector::zeros(self.0.system().p())
            }
        }
        let sys = system(n, &c);
        let sigma0 = spd(n, &c[45..]);
        let table = GramianTable::new(&sys).unwrap();
        let pi0 = feasible(&table, sym(n, &c[54..], 2.0), 0.0, 0.05);
        let mu1 = Vector::from_fn(n, |i, _| 5.0 * c[60 + i]);
        let law = ControlLaw::new(&sys, &pi0, &Vector::zeros(n), &mu1).unwrap();
        prop_assert!(law.feedforward(0.5).norm() > 0.0);
        let with = covariance_ode(&sys, &law, &sigma0).unwrap().terminal();
        let without = covariance_ode(&sys, &NoFeedforward(&law), &sigma0).unwrap().terminal();
        prop_assert_eq!(with, without);
    }

    #[test]
    fn scenario_round_trips(
        a in prop::collection::vec(-10.0f64..10.0, 4),
        rate in 0.0f64..5.0,
        mean in -3.0f64..3.0,
        seed in any::<u64>(),
        paths in 1usize..1_000_000,
    ) {
        let mut s = Scenario::builtin("example2").unwrap();
        s.system = SystemBlock {
            a: ScheduleSpec::Table { times: vec![0.0, 0.5, 1.0], values: vec![vec![vec![a[0], a[1]], vec![a[2], a[3]]]; 3] },
            b: ScheduleSpec::PiecewiseConstant { breaks: vec![0.0, 0.3], values: vec![vec![vec![0.0], vec![1.0]], vec![vec![0.0], vec![a[0]]]] },
            c: s.system.c.clone(),
            r: ScheduleSpec::Polynomial { entries: vec![vec![vec![1.0, a[1].abs()]]] },
        };
        s.noise.push(NoiseBlock::CompoundPoisson {
            compensated: true,
            channels: vec![ChannelSpec {
                rate: ScheduleSpec::Constant { value: vec![vec![rate]] },
                law: LawSpec::TwoPoint { low: mean, high: mean + 1.0, p_low: 0.25 },
            }],
        });
        s.noise.push(NoiseBlock::Precomputed { rate: ScheduleSpec::Constant { value: vec![vec![rate]] } });
        s.problem = ProblemBlock { mu0: vec![mean, a[0]], sigma0: vec![vec![1.0, 0.0], vec![0.0, 2.0]], mu1: vec![0.0, 0.0], sigma1: vec![vec![0.5, 0.1], vec![0.1, 0.5]] };
        s.simulation.seed = seed;
        s.simulation.paths = paths;
        let text = s.to_toml().unwrap();
        let back = Scenario::from_toml(&text).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(back.to_toml().unwrap(), text);
        prop_assert!(back.build_system().is_ok());
    }
}
