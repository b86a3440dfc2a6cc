//! Which mechanisms each decision rule depends on, why, and the graph as DOT.

use causal_games::graph::{build_mechanised_graph, d_separated, reachability_paths, DiGraph, NodeId};
use causal_games::io::{export_dot, fixtures, DotKind};

fn main() -> causal_games::Result<()> {
    let game = fixtures::job_market();

    let g = DiGraph::of_game(&game);
    println!("T _||_ D2 | D1: {}", d_separated(&g, &["T"], &["D2"], &["D1"])?);
    println!(
        "T _||_ U2 | D1 D2: {}",
        d_separated(&g, &["T"], &["U2"], &["D1", "D2"])?
    );

    let mech = build_mechanised_graph(&game)?;
    println!("edges between mechanisms:");
    for (a, b) in mech.inter_edges() {
        println!("  {a} -> {b}");
    }

    let from = NodeId::rule("D1");
    let to = NodeId::rule("D2");
    for p in reachability_paths(&game, &from, &to)? {
        println!(
            "{from} reaches {to} via {} given {:?} ({:?})",
            p.path, p.conditioning, p.disjunct
        );
    }

    print!("{}", export_dot(&game, DotKind::Mechanised)?);
    Ok(())
}
