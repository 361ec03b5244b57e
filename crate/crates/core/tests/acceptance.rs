use std::sync::OnceLock;

use annihilate_core::exec::Execution;
use annihilate_core::harness::{
    operator_identity_error, random_configuration, run_convergence, run_property_suite, sample_particles,
    stability_distances, three_collision_fixture, ExperimentSpec, InitialDatum, PropertyReport, PropertySuiteConfig,
};
use annihilate_core::hjsolver::{
    common_stable_dt, far_field, near_field, step_hj, step_hj_with_dt, GridFunction, SchemeConfig,
};
use annihilate_core::levelset::{operator_parts, StepFunction};
use annihilate_core::measures::{
    aec_modulus, cdf_sup_distance, dipole, narrow_distance_proxy, SignedAtomicMeasure, TestDictionary,
};
use annihilate_core::{evolve, IntegratorConfig, ParticleState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, name: &str, pass: bool, detail: String) {
    println!("criterion {id:>2} {:<28} {}  {detail}", name, if pass { "PASS" } else { "FAIL" });
}

fn suite() -> &'static PropertyReport {
    static SUITE: OnceLock<PropertyReport> = OnceLock::new();
    SUITE.get_or_init(|| run_property_suite(2024, &PropertySuiteConfig::default(), Execution::Parallel))
}

#[test]
fn c01_pair_annihilation() {
    let mut worst_tau = 0.0f64;
    let mut worst_gap = 0.0f64;
    for a in [0.1, 0.5, 1.0, 3.0] {
        let tau = 2.0 * a * a;
        let s = ParticleState::new(vec![-a, a], vec![1, -1]).unwrap();
        let cfg = IntegratorConfig { t_end: 1.5 * tau, record_steps: true, ..Default::default() };
        let traj = evolve(&s, &cfg).unwrap();
        assert_eq!(traj.events.len(), 1);
        worst_tau = worst_tau.max((traj.events[0].tau - tau).abs() / tau);
        for st in traj.samples.iter().filter(|st| st.charges() == [1, -1]) {
            let d = st.positions()[1] - st.positions()[0];
            // relative to the scale d0^2 of the linear law
            let exact = 4.0 * a * a - 2.0 * st.time();
            worst_gap = worst_gap.max((d * d - exact).abs() / (4.0 * a * a));
        }
    }
    let pass = worst_tau <= 1e-6 && worst_gap <= 1e-6;
    report(1, "pair annihilation", pass, format!("tau rel {worst_tau:.3e}, gap^2 dev / d0^2 {worst_gap:.3e} (<= 1e-6)"));
    assert!(pass);
}

#[test]
fn c02_lattice_equality_n9() {
    let n = 9;
    let s = ParticleState::new((1..=n).map(|i| i as f64).collect(), vec![1; n]).unwrap();
    let times: Vec<f64> = (1..=200).map(|k| k as f64 * 0.05).collect();
    let cfg = IntegratorConfig { t_end: 10.0, sample_times: times, ..Default::default() };
    let traj = evolve(&s, &cfg).unwrap();
    let m = n as f64;
    let worst = traj
        .samples
        .iter()
        .map(|st| {
            let d = st.equal_sign_gap(1);
            (d * d - (1.0 + 8.0 * st.time() / (m * m - 1.0))).abs()
        })
        .fold(0.0, f64::max);
    let pass = worst <= 1e-8;
    report(2, "odd lattice equality n=9", pass, format!("max |d+^2 - (1 + 8t/80)| = {worst:.3e} (<= 1e-8)"));
    assert!(pass, "max deviation {worst}");
}

#[test]
fn c03_conservation() {
    let r = suite();
    let m1 = r.check("m1_conservation").unwrap();
    let q = r.check("net_charge").unwrap();
    let mass = r.check("measure_mass").unwrap();
    let pass = r.runs_with_events >= 20 && m1.pass && q.pass && mass.pass;
    report(
        3,
        "conservation",
        pass,
        format!("{} runs with events; worst M1 drift {:.3e}; charge failures {}", r.runs_with_events, m1.worst_value, q.failures),
    );
    assert!(pass);
}

#[test]
fn c04_m2_drift() {
    let c = suite().check("m2_drift").unwrap();
    let pass = c.evaluated > 0 && c.worst_value <= 1e-5;
    report(4, "second moment drift", pass, format!("worst rel {:.3e} (<= 1e-5) over {} runs", c.worst_value, c.evaluated));
    assert!(pass);
}

#[test]
fn c05_collision_exponent() {
    let r = suite();
    let c = r.check("collision_exponent").unwrap();
    let pass = c.evaluated > 0 && c.worst_value <= 0.02;
    report(
        5,
        "collision exponent",
        pass,
        format!("{} events, worst |slope - 1/2| {:.3e} (<= 0.02)", r.total_events, c.worst_value),
    );
    assert!(pass, "{:?}", c.examples);
}

#[test]
fn c06_operator_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let worst = (0..100)
        .map(|_| {
            let n = rng.gen_range(2..=8);
            operator_identity_error(&random_configuration(&mut rng, n, 0.1))
        })
        .fold(0.0, f64::max);
    let pass = worst <= 1e-10;
    report(6, "operator identity", pass, format!("worst abs {worst:.3e} (<= 1e-10) over 100 states"));
    assert!(pass);
}

#[test]
fn c07_staircase_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut far_ratio = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(2..=16);
        let s = random_configuration(&mut rng, n, 0.1);
        let u = StepFunction::from_particles(&s);
        let bound_num = 4.0 * u.sup_norm() + u.eps();
        for k in 0..u.len() {
            for f in [1.0, 0.5, 0.1] {
                let rho = f * u.default_rho(k);
                let parts = operator_parts(&u, u.locations()[k], rho).unwrap();
                far_ratio = far_ratio.max(parts.far.abs() / (bound_num / rho));
            }
        }
    }

    // the same bound through the grid quadrature on a sampled staircase
    let eps = 1.0 / 24.0;
    let sampled = sample_particles(&|x| InitialDatum::DoubleBump.eval(x, eps), 24, 0.5, InitialDatum::DoubleBump.window()).unwrap();
    let stair = sampled.step_function(&sampled.state);
    let h = 1.0 / 256.0;
    let g = GridFunction::from_fn(|x| stair.eval(x), 3.0, h).unwrap();
    for m in [8, 32] {
        let rho = m as f64 * h;
        for i in 0..g.len() {
            far_ratio = far_ratio.max(far_field(&g, i, m).abs() / ((4.0 * g.sup_norm() + eps) / rho));
        }
    }

    let y = 0.3;
    let mut quartic_rel = 0.0f64;
    for rho in [0.125, 0.25, 0.5] {
        let h = rho / 32.0;
        let u = GridFunction::from_fn(|x| (x - y).powi(4), 2.0, h).unwrap();
        for i in (0..u.len()).step_by(37).filter(|&i| i >= 64 && i + 64 < u.len()) {
            let d = u.x(i) - y;
            let exact = 12.0 * d * d * rho + 2.0 / 3.0 * rho.powi(3);
            quartic_rel = quartic_rel.max((near_field(&u, i, 32) - exact).abs() / exact);
        }
    }
    let pass = far_ratio <= 1.0 && quartic_rel <= 1e-2;
    report(7, "staircase bounds", pass, format!("far/bound {far_ratio:.3} (<= 1), quartic rel {quartic_rel:.3e} (<= 1e-2)"));
    assert!(pass);
}

/// Smooth data constant outside `[-1.5, 1.5]`, so the finite grid with
/// constant tails represents it exactly.
fn random_smooth(rng: &mut ChaCha8Rng) -> impl Fn(f64) -> f64 {
    let terms: Vec<(f64, f64, f64, bool)> = (0..4)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-0.8..0.8), rng.gen_range(0.2..0.7), rng.gen_bool(0.5)))
        .collect();
    move |x| {
        terms
            .iter()
            .map(|&(c, m, w, bump)| {
                let z = (x - m) / w;
                if bump {
                    c * (1.0 - z * z).max(0.0).powi(3)
                } else {
                    let t = ((z + 1.0) / 2.0).clamp(0.0, 1.0);
                    c * t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
                }
            })
            .sum()
    }
}

#[test]
fn c08_scheme_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cfg = SchemeConfig { half_width: 4.0, h: 1.0 / 64.0, rho_cells: 4, t_end: 0.3, ..Default::default() };
    let (mut order_violations, mut sup_growth, mut lip_growth, mut const_drift) = (0usize, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let f = random_smooth(&mut rng);
        let bump = rng.gen_range(0.0..0.5);
        let mut u = GridFunction::from_fn(&f, cfg.half_width, cfg.h).unwrap();
        let mut v = GridFunction::from_fn(|x| f(x) + bump * (-x * x).exp(), cfg.half_width, cfg.h).unwrap();
        let mut w = u.clone();
        let c = rng.gen_range(-2.0..2.0);
        let mut k = GridFunction::from_fn(|_| c, cfg.half_width, cfg.h).unwrap();
        while u.time() < cfg.t_end {
            let dt = common_stable_dt(&u, &v, &cfg).unwrap().min(cfg.t_end - u.time());
            u = step_hj_with_dt(&u, &cfg, dt).unwrap();
            v = step_hj_with_dt(&v, &cfg, dt).unwrap();
            let below = v.values().iter().zip(u.values()).filter(|(a, b)| a < b).count();
            let tails = (v.tails().0 < u.tails().0) as usize + (v.tails().1 < u.tails().1) as usize;
            order_violations += below + tails;
        }
        while w.time() < cfg.t_end {
            let (next, _) = step_hj(&w, &cfg, cfg.t_end - w.time()).unwrap();
            sup_growth = sup_growth.max(next.sup_norm() - w.sup_norm());
            lip_growth = lip_growth.max(next.lipschitz() - w.lipschitz());
            w = next;
        }
        while k.time() < cfg.t_end {
            k = step_hj(&k, &cfg, 0.05).unwrap().0;
        }
        const_drift = const_drift.max(k.values().iter().map(|x| (x - c).abs()).fold(0.0, f64::max));
    }
    let pass = order_violations == 0 && sup_growth <= 1e-12 && lip_growth <= 1e-12 && const_drift <= 1e-12;
    report(
        8,
        "scheme properties",
        pass,
        format!("order violations {order_violations}, sup growth {sup_growth:.2e}, Lip growth {lip_growth:.2e}, constant drift {const_drift:.2e}"),
    );
    assert!(pass);
}

#[test]
fn c09_example_pair_family() {
    let mut worst_cross = 0.0f64;
    let mut worst_excess = f64::NEG_INFINITY;
    for offset in [0.25, 0.5, 0.75] {
        let spec = ExperimentSpec {
            datum: InitialDatum::PairBump,
            ladder: vec![4, 8, 16],
            offset,
            t_end: 3.5,
            snapshots: 10,
            ..Default::default()
        };
        let out = run_convergence(&spec, Execution::Parallel).unwrap();
        for r in &out.table.rows {
            assert!(r.error.is_none(), "{:?}", r.error);
            worst_cross = worst_cross.max(r.crossing_error.unwrap());
            worst_excess = worst_excess.max(r.e_n - 1.0 / r.n as f64);
        }
    }
    let pass = worst_cross <= 1e-6 && worst_excess <= 1e-6;
    report(
        9,
        "pair family end to end",
        pass,
        format!("crossing abs {worst_cross:.3e} (<= 1e-6), max e_n - 1/n {worst_excess:.3e} (<= 1e-6)"),
    );
    assert!(pass);
}

#[test]
fn c10_convergence_ladder() {
    let mut pass = true;
    let mut detail = Vec::new();
    for datum in [InitialDatum::Sigmoid, InitialDatum::DoubleBump] {
        let spec = ExperimentSpec { datum, ..Default::default() };
        assert_eq!(spec.ladder, [8, 16, 32, 64, 128]);
        assert_eq!(spec.scheme.h, 1.0 / 256.0);
        let t = run_convergence(&spec, Execution::Parallel).unwrap().table;
        let e: Vec<f64> = t.rows.iter().map(|r| r.e_n).collect();
        let ok = t.monotone && e[4] <= e[0] / 3.0;
        pass &= ok;
        detail.push(format!("{datum:?}: e_8 {:.4} e_128 {:.4} monotone {}", e[0], e[4], t.monotone));
    }
    report(10, "convergence ladder", pass, detail.join("; "));
    assert!(pass);
}

#[test]
fn c11_measure_diagnostics() {
    let ns = [8usize, 16, 32, 64, 128, 256, 512];
    let zero = SignedAtomicMeasure::zero(1.0);
    let dipoles: Vec<SignedAtomicMeasure> = ns.iter().map(|&n| dipole(n)).collect();
    let dict = TestDictionary::dyadic(-1.0, 2.0, 6);
    let proxies: Vec<f64> = dipoles.iter().map(|d| narrow_distance_proxy(d, &zero, &dict)).collect();
    // |phi(1/n) - phi(0)| <= Lip(phi) / n for every dictionary member
    let lip_dict = dict.lipschitz();
    let proxy_to_zero = proxies.windows(2).all(|w| w[1] < w[0])
        && proxies.iter().zip(ns).all(|(&p, n)| p <= lip_dict / n as f64 * (1.0 + 1e-12));
    let cdf_one = dipoles.iter().all(|d| cdf_sup_distance(d, &zero) == 1.0);
    let aec_fails = [
        Box::new(|r: f64| r) as Box<dyn Fn(f64) -> f64 + Sync + Send>,
        Box::new(|r: f64| 10.0 * r.sqrt()),
        Box::new(|r: f64| (100.0 * r).min(0.5)),
    ]
    .into_iter()
    .all(|omega| !aec_modulus(&dipoles, omega, 0.1).pass);

    let lip = InitialDatum::Sigmoid.lipschitz(0.0);
    let family: Vec<SignedAtomicMeasure> = ns
        .iter()
        .map(|&n| {
            let s = sample_particles(&|x| InitialDatum::Sigmoid.eval(x, 0.0), n, 0.5, (-1.0, 1.0)).unwrap();
            SignedAtomicMeasure::from_state(&s.state)
        })
        .collect();
    let aec = aec_modulus(&family, move |r| lip * r, 2.0 / 64.0);
    let s_ok = aec.s.iter().zip(ns).all(|(&s, n)| s <= 2.0 / n as f64);
    let pass = proxy_to_zero && cdf_one && aec_fails && aec.pass && s_ok;
    report(
        11,
        "measure diagnostics",
        pass,
        format!(
            "dipole proxy {:.2e} -> {:.2e} (<= {lip_dict:.1}/n), cdf sup 1: {cdf_one}, AEC fails: {aec_fails}; sigmoid s_n*n max {:.3}",
            proxies[0],
            proxies.last().unwrap(),
            aec.s.iter().zip(ns).map(|(s, n)| s * n as f64).fold(0.0, f64::max)
        ),
    );
    assert!(pass);
}

#[test]
fn c12_stability() {
    let t_end = 3.0;
    let cfg = IntegratorConfig { t_end, ..Default::default() };
    let events = evolve(&three_collision_fixture(), &cfg).unwrap().events.len();
    let d = stability_distances(&[1e-2, 1e-3, 1e-4], t_end, Execution::Parallel).unwrap();
    let pass = events == 3 && d.windows(2).all(|w| w[1] < w[0]);
    report(12, "stability", pass, format!("{events} collisions; sup d_M = {:.3e}, {:.3e}, {:.3e}", d[0], d[1], d[2]));
    assert!(pass);
}
