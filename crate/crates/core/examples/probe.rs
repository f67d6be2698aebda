use sipmm::Problem;
use sipmm::baselines::{adaptive_discretization_solve, gdma_solve, DiscretizationConfig, GdmaConfig};
use sipmm::metrics::kkt_residuals;
use sipmm::problems::{calibrate_threshold, make_blobs, make_dro_mtl};
use sipmm::solver::{solve, SolverConfig};
use sipmm::{Point, Schedule};

fn main() {
    for seed in [7u64, 11, 23] {
        let split = make_blobs(seed, 6, 200, 24, 1.0).unwrap();
        let r = calibrate_threshold(&split, 12, 1e-3, 3000, seed).unwrap();
        let p = make_dro_mtl(split, 12, 1e-3, r).unwrap();
        let x0 = Point::new(p.initial_weights(seed)).unwrap();
        let (_, g0) = p.exact_max_w(x0.as_slice()).unwrap();

        let t0 = std::time::Instant::now();
        let mut config = SolverConfig::new(Schedule::practical(1000, 20.0, 5e-2), x0.clone());
        config.record_stride = 25;
        let trace = solve(&p, &config).unwrap();
        let first = &trace.records[0];
        let last = trace.records.last().unwrap();
        let rep0 = kkt_residuals(&p, &Point::new(first.x.clone()).unwrap(), first.lambda, 400).unwrap();
        let repl = kkt_residuals(&p, &Point::new(last.x.clone()).unwrap(), last.lambda, 400).unwrap();
        let budget = trace.counts.total();
        let t_idbpd = t0.elapsed();

        let t0 = std::time::Instant::now();
        let gconf = GdmaConfig { penalty: 1.0, gamma: 5e-2, ascent_steps: 10, horizon: (budget as usize) / 26, record_stride: 100 };
        let gtrace = gdma_solve(&p, &gconf, &x0, None, None).unwrap();
        let glast = gtrace.records.last().unwrap();
        let grep = kkt_residuals(&p, &Point::new(glast.x.clone()).unwrap(), glast.lambda, 400).unwrap();
        let t_gdma = t0.elapsed();

        let t0 = std::time::Instant::now();
        let dconf = DiscretizationConfig {
            outer_rounds: 10, inner_pd_iterations: (budget as usize) / (10 * 14), violation_tolerance: 1e-4,
            multiplier_step: 0.05, max_active_constraints: 32, primal_step: 5e-2, eval_steps: 300, record_stride: 100,
        };
        let out = adaptive_discretization_solve(&p, &dconf, &x0, None).unwrap();
        let dlast = out.trace.records.last().unwrap();
        let drep = kkt_residuals(&p, &Point::new(dlast.x.clone()).unwrap(), dlast.lambda, 400).unwrap();
        let t_disc = t0.elapsed();

        println!("seed={seed}: r={r:.4} g(x0)={g0:.3} budgets: idbpd {} gdma {} disc {}", budget, gtrace.counts.total(), out.trace.counts.total());
        println!("  idbpd stat {:.3}->{:.4} ({:.0}x) infeas->{:.3e} [{t_idbpd:.1?}]", rep0.stationarity, repl.stationarity, rep0.stationarity/repl.stationarity, repl.infeasibility);
        println!("  gdma  infeas {:.3e} (gdma/idbpd = {:.1}) stat {:.3} [{t_gdma:.1?}]", grep.infeasibility, grep.infeasibility / repl.infeasibility.max(1e-12), grep.stationarity);
        println!("  disc  infeas {:.3e} (idbpd/disc = {:.3}) stat {:.3} [{t_disc:.1?}]", drep.infeasibility, repl.infeasibility / drep.infeasibility.max(1e-12), drep.stationarity);
    }
}
