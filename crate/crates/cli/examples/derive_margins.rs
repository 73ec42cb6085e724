//! Re-runs the architecture ordering experiment over its seeds and writes
//! the per-seed accuracies and derived margins to `data/ordering_margins.toml`.

use d2rnn::exec::Execution;
use d2rnn_cli::trend::{self, TrendSetup, ARCHS};

fn main() {
    let setup = TrendSetup::default();
    let record = trend::run(&setup, Execution::default()).unwrap_or_else(|e| {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    });
    for r in &record.runs {
        println!("seed {}: {:?} = {:?}", r.seed, ARCHS, r.accuracy);
    }
    for c in &record.comparisons {
        println!(
            "vs {}: mean gap {:+.4} se {:.4} margin {:.4}",
            c.baseline, c.mean_gap, c.std_error, c.margin
        );
    }
    let path = trend::record_path();
    trend::save_record(&record, &path).expect("write record");
    println!("wrote {}", path.display());
}
