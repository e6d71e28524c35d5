mod common;
use slicer_core::engine::WeakeningMode;

#[test]
fn dump_fig3_art() {
    let src = "
    int p, c, s, x, y;
    s = nondet(); x = 0; y = 0;
    if (s != 0) { p = 1; } else { p = 2; }
    while (nondet()) {
        x = x + 1; c = 100;
        while (nondet()) { if (p != 1 && p != 2) { c = 0; } y = y + 1; }
        assert(c == 100);
    }
    assert(s != 0 && p == 1 || s == 0 && p == 2);
    ";
    let p = common::run_pipeline(src, WeakeningMode::Cex);
    println!("=== CFA ===\n{}", p.compacted.as_ref().unwrap().dump());
    println!("=== ART ===\n{}", p.art.dump());
    for (i, s) in p.stats.sites.iter().enumerate() {
        println!("site {i}: edge {} |phi|={} queries={} removed={:?}", s.edge, s.phi.len(), s.queries,
                 s.removed.iter().map(|l| l.to_string()).collect::<Vec<_>>());
    }
}
