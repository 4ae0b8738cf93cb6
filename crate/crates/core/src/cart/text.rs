//! Line-oriented tree dump: a header followed by one tab-separated line per
//! node, `id parent direction threshold output count`. Leaves and the root
//! use `-` for the fields they lack. A parent's first listed child is its
//! left child. Split gains are not stored.

use std::fmt::Write as _;

use super::{FitMeta, GrowConfig, Node, SplitResult, Tree, TreeMode};
use crate::error::{Error, Result};

pub const HEADER: &str = "id\tparent\tdirection\tthreshold\toutput\tcount";

impl Tree {
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.nodes.len() * 48);
        out.push_str(HEADER);
        out.push('\n');
        for node in &self.nodes {
            let parent = node.parent.map_or("-".to_string(), |p| p.to_string());
            let (dir, thr) = match node.split {
                Some(s) => (s.direction.to_string(), s.threshold.to_string()),
                None => ("-".to_string(), "-".to_string()),
            };
            let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}\t{}", node.id, parent, dir, thr, node.output, node.count());
        }
        out
    }

    /// Rebuilds a predict-capable tree from [`Tree::to_text`] output. Sample
    /// ids are not stored, so nodes come back with empty id lists; counts are kept.
    pub fn from_text(text: &str, p: usize) -> Result<Tree> {
        let err = |line: usize, reason: &str| Error::Parse { line, reason: reason.to_string() };
        let mut rows = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line_no = ln + 1;
            if ln == 0 {
                if line.trim() != HEADER {
                    return Err(err(line_no, "missing header"));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 6 {
                return Err(err(line_no, "expected 6 fields"));
            }
            let id: usize = f[0].parse().map_err(|_| err(line_no, "bad id"))?;
            if id != rows.len() {
                return Err(err(line_no, "ids must be consecutive from 0"));
            }
            let parent = match f[1] {
                "-" => None,
                s => Some(s.parse::<usize>().map_err(|_| err(line_no, "bad parent"))?),
            };
            if parent.is_some_and(|q| q >= id) || (parent.is_none() && id != 0) {
                return Err(err(line_no, "parent must precede child"));
            }
            let split = match (f[2], f[3]) {
                ("-", "-") => None,
                (d, t) => {
                    let direction: usize = d.parse().map_err(|_| err(line_no, "bad direction"))?;
                    if direction >= p {
                        return Err(err(line_no, "direction out of range"));
                    }
                    let threshold: f64 = t.parse().map_err(|_| err(line_no, "bad threshold"))?;
                    Some((direction, threshold))
                }
            };
            let output: f64 = f[4].parse().map_err(|_| err(line_no, "bad output"))?;
            let count: usize = f[5].parse().map_err(|_| err(line_no, "bad count"))?;
            rows.push((parent, split, output, count, line_no));
        }
        if rows.is_empty() {
            return Err(err(1, "no nodes"));
        }
        let mut nodes: Vec<Node> = Vec::with_capacity(rows.len());
        for (id, &(parent, _, output, count, _)) in rows.iter().enumerate() {
            nodes.push(Node {
                id,
                parent,
                depth: 0,
                sample_ids: Vec::new(),
                n_samples: count,
                bounds: vec![(0.0, 1.0); p],
                split: None,
                children: None,
                output,
            });
        }
        for id in 0..rows.len() {
            let kids: Vec<usize> = rows.iter().enumerate().filter(|(_, r)| r.0 == Some(id)).map(|(k, _)| k).collect();
            let (_, split, _, _, line_no) = rows[id];
            match (split, kids.as_slice()) {
                (None, []) => {}
                (Some((direction, threshold)), &[l, r]) => {
                    let order_index = rows[l].3;
                    nodes[id].split = Some(SplitResult { direction, order_index, threshold, gain: 0.0 });
                    nodes[id].children = Some((l, r));
                }
                _ => return Err(err(line_no, "split nodes need exactly two children, leaves none")),
            }
        }
        for id in 0..nodes.len() {
            if let (Some((l, r)), Some(s)) = (nodes[id].children, nodes[id].split) {
                let depth = nodes[id].depth + 1;
                let mut lb = nodes[id].bounds.clone();
                lb[s.direction].1 = s.threshold;
                let mut rb = nodes[id].bounds.clone();
                rb[s.direction].0 = s.threshold;
                nodes[l].depth = depth;
                nodes[l].bounds = lb;
                nodes[r].depth = depth;
                nodes[r].bounds = rb;
            }
        }
        let max_depth = nodes.iter().map(|n| n.depth).max().unwrap_or(0);
        Ok(Tree {
            nodes,
            p,
            max_depth,
            mode: TreeMode::Adaptive,
            meta: FitMeta { seed: None, config: GrowConfig::new(max_depth), mtry: None },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cart::grow;
    use crate::dgp::Dataset;

    #[test]
    fn golden_stump_text() {
        let data = Dataset::from_columns(vec![vec![0.1, 0.25, 0.6, 0.9]], vec![0.0, 0.0, 4.0, 4.0], None, None).unwrap();
        let tree = grow(&data, &data.y, &GrowConfig::stump()).unwrap();
        let expected = "id\tparent\tdirection\tthreshold\toutput\tcount\n\
                        0\t-\t0\t0.25\t2\t4\n\
                        1\t0\t-\t-\t0\t2\n\
                        2\t0\t-\t-\t4\t2\n";
        assert_eq!(tree.to_text(), expected);
    }

    #[test]
    fn parse_restores_predictions() {
        let spec = crate::dgp::DgpSpec::location(60, 2, 0.0, 1.0).with_seed(8);
        let data = crate::dgp::sample(&spec).unwrap();
        let tree = grow(&data, &data.y, &GrowConfig::new(3)).unwrap();
        let back = Tree::from_text(&tree.to_text(), 2).unwrap();
        for i in 0..data.n() {
            let x = data.row(i);
            assert_eq!(back.predict(&x), tree.predict(&x));
        }
        assert_eq!(back.to_text(), tree.to_text());
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(Tree::from_text("nope", 1).is_err());
        assert!(Tree::from_text(&format!("{HEADER}\n0\t-\t0\t0.5\t1\t2\n"), 1).is_err());
        assert!(Tree::from_text(&format!("{HEADER}\n0\t-\t3\t0.5\t1\t2\n1\t0\t-\t-\t0\t1\n2\t0\t-\t-\t0\t1\n"), 1).is_err());
    }
}
