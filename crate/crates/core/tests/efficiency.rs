use csreg::experiments::{run_montecarlo, MCConfig, Parameter};
use csreg::oracle::fisher_semiparametric;
use csreg::{Method, ModelSpec, TruncationSpec};

// Large-sample run; takes hours on one core.
#[test]
#[ignore]
fn efficient_methods_approach_the_bound_at_n_20000() {
    let model = ModelSpec::standard();
    let bound = 1.0 / fisher_semiparametric(&model, TruncationSpec::default()).unwrap();
    let mut cfg = MCConfig::new(20_000, 1000);
    cfg.methods = vec![Method::Score2, Method::Plugin];
    cfg.intercept = false;
    cfg.master_seed = 20_000;
    cfg.parallelism = std::thread::available_parallelism().map_or(1, |n| n.get());
    let table = run_montecarlo(&model, &cfg).unwrap();
    for method in [Method::Score2, Method::Plugin] {
        let row = table.get(Parameter::Beta, method).unwrap();
        assert!((row.n_times_var - bound).abs() <= 0.15 * bound, "{method}: {} vs {bound}", row.n_times_var);
    }
}
