use std::path::PathBuf;

use fewkg::checkpoint::load_checkpoint;
use fewkg::config::load_config;
use fewkg::experiment::load_or_generate;
use fewkg_core::data::SplitName;
use fewkg_core::encoder::{self, Graph};
use fewkg_core::eval::meta_evaluate;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let config = load_config(&PathBuf::from(&args[1])).unwrap();
    let params = load_checkpoint(&PathBuf::from(&args[2])).unwrap();
    let dataset = load_or_generate(&config).unwrap();
    let model = &config.model;

    let settings = config.settings();
    for steps in [0usize, 1, 5] {
        let mut s = settings.clone();
        s.train.inner_steps = steps;
        for split in [SplitName::Train, SplitName::Val, SplitName::Test] {
            let rep = meta_evaluate(&params, &dataset, split, &s, 99).unwrap();
            println!("S={steps} {split:?} MRR {:.4} over {} queries", rep.mrr, rep.n_queries);
        }
    }

    // Tail-side embeddings without trait (relation-independent view).
    let mut g = Graph::new(&params, model, false);
    let mut embs = Vec::new();
    for e in 0..dataset.n_entities() {
        let node = encoder::encode_entity(&mut g, dataset.entity_description(e), None, false).unwrap();
        embs.push(g.value(node).data().to_vec());
    }
    let l1 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>();

    // Types repeat mod n_types in the generator.
    let n_types: usize = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(10);
    let (mut within, mut across) = (Vec::new(), Vec::new());
    for i in 0..embs.len() {
        for j in (i + 1)..embs.len() {
            let d = l1(&embs[i], &embs[j]);
            if i % n_types == j % n_types {
                within.push(d);
            } else {
                across.push(d);
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!("within-type mean L1 {:.4}  across-type mean L1 {:.4}  ratio {:.3}",
        mean(&within), mean(&across), mean(&within) / mean(&across));

    // For each relation: does e_h + e_r point at the right type?
    let mut rels: Vec<(usize, &str)> = Vec::new();
    for (split, tag) in [(SplitName::Train, "train"), (SplitName::Val, "val"), (SplitName::Test, "test")] {
        for &rel in dataset.split(split) {
            rels.push((rel, tag));
        }
    }
    for (rel, tag) in rels {
        let o_r = {
            let node = encoder::encode_relation(&mut g, dataset.relation_description(rel)).unwrap();
            g.value(node).data().to_vec()
        };
        let mut type_rank_sum = 0.0;
        let mut n = 0.0;
        for t in dataset.relation_triplets(rel) {
            let target = embs[t.head].iter().zip(&o_r).map(|(h, r)| h + r).collect::<Vec<_>>();
            // rank of the true tail's TYPE centroid among all type centroids
            let mut cents = vec![vec![0.0; target.len()]; n_types];
            let mut counts = vec![0.0; n_types];
            for (e, emb) in embs.iter().enumerate() {
                for (c, x) in cents[e % n_types].iter_mut().zip(emb) {
                    *c += x;
                }
                counts[e % n_types] += 1.0;
            }
            for (cent, cnt) in cents.iter_mut().zip(&counts) {
                for c in cent.iter_mut() {
                    *c /= cnt;
                }
            }
            let dists: Vec<f64> = cents.iter().map(|c| l1(&target, c)).collect();
            let true_type = t.tail % n_types;
            let rank = 1 + dists.iter().filter(|&&d| d < dists[true_type]).count();
            type_rank_sum += rank as f64;
            n += 1.0;
        }
        println!("relation {} ({}, {}) mean type-rank {:.2} of {}", rel, dataset.relation_name(rel), tag, type_rank_sum / n, n_types);
    }
}
