use warpmetric::dtw::{build_distance_table, DtwConfig};
use warpmetric::lmnn::{train, LmnnConfig};
use warpmetric::seqdata::{generate_synthetic, SyntheticSpec};

fn main() {
    let spec = SyntheticSpec::new(20, 3, 2, (8, 12), vec![0], 5.0, 0.5, 7);
    let corpus = generate_synthetic(&spec).unwrap();
    let table = build_distance_table(&corpus, &DtwConfig::default()).unwrap();
    let labels = corpus.labels().to_vec();
    let cfg = LmnnConfig { max_iters: 3000, ..LmnnConfig::default() };
    let (model, trace) = train(&table, &labels, &cfg).unwrap();
    println!("converged={} hit_max={} iters={}", trace.converged, trace.hit_max_iters, trace.rows.len());
    let n = trace.rows.len();
    for row in trace.rows.iter().skip(n.saturating_sub(30)) {
        println!("it={:4} obj={:.8e} step={:.3e} active={}", row.iter, row.objective, row.step, row.active_count);
    }
    println!("profile = {:?}", model.relevance_profile(false).values);
}
