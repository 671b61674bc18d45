use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

/// Per-rollout record emitted by RL: entropy, advantage, shaped advantage.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutTriple {
    pub step: usize,
    pub epoch: usize,
    pub task_id: String,
    pub index: usize,
    pub seq_entropy: f64,
    pub advantage: f64,
    pub shaped_advantage: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapCell {
    pub count: usize,
    /// `None` for empty cells.
    pub mean_shaped_advantage: Option<f64>,
}

/// 2-D histogram over (sequence entropy, advantage).
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub x_edges: Vec<f64>,
    pub y_edges: Vec<f64>,
    /// Row-major over x bins: `cells[ix * bins_y + iy]`.
    pub cells: Vec<HeatmapCell>,
}

fn span(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

fn edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    (0..=bins)
        .map(|i| if i == bins { hi } else { lo + (hi - lo) * i as f64 / bins as f64 })
        .collect()
}

fn bin_of(edges: &[f64], v: f64) -> usize {
    let bins = edges.len() - 1;
    let (lo, hi) = (edges[0], edges[bins]);
    let raw = libm::floor((v - lo) / (hi - lo) * bins as f64);
    if raw < 0.0 {
        0
    } else {
        (raw as usize).min(bins - 1)
    }
}

impl Heatmap {
    /// Bins spanning the observed data range. Empty input gives an empty map.
    pub fn from_triples(triples: &[RolloutTriple], bins_x: usize, bins_y: usize) -> Self {
        let bins_x = bins_x.max(1);
        let bins_y = bins_y.max(1);
        match (span(triples.iter().map(|t| t.seq_entropy)), span(triples.iter().map(|t| t.advantage))) {
            (Some((x0, x1)), Some((y0, y1))) => Self::with_edges(triples, edges(x0, x1, bins_x), edges(y0, y1, bins_y)),
            _ => Self { x_edges: Vec::new(), y_edges: Vec::new(), cells: Vec::new() },
        }
    }

    /// Bins spanning `[x0, x1] x [y0, y1]`; values outside fall into the
    /// edge bins.
    pub fn with_range(triples: &[RolloutTriple], x: (f64, f64), y: (f64, f64), bins_x: usize, bins_y: usize) -> Self {
        Self::with_edges(triples, edges(x.0, x.1, bins_x.max(1)), edges(y.0, y.1, bins_y.max(1)))
    }

    fn with_edges(triples: &[RolloutTriple], x_edges: Vec<f64>, y_edges: Vec<f64>) -> Self {
        let by = y_edges.len() - 1;
        let n = (x_edges.len() - 1) * by;
        let mut count = vec![0usize; n];
        let mut sum = vec![0.0; n];
        for t in triples {
            let c = bin_of(&x_edges, t.seq_entropy) * by + bin_of(&y_edges, t.advantage);
            count[c] += 1;
            sum[c] += t.shaped_advantage;
        }
        let cells = count
            .iter()
            .zip(&sum)
            .map(|(&count, &s)| HeatmapCell {
                count,
                mean_shaped_advantage: (count > 0).then(|| s / count as f64),
            })
            .collect();
        Self { x_edges, y_edges, cells }
    }

    pub fn bins_x(&self) -> usize {
        self.x_edges.len().saturating_sub(1)
    }

    pub fn bins_y(&self) -> usize {
        self.y_edges.len().saturating_sub(1)
    }

    pub fn cell(&self, ix: usize, iy: usize) -> &HeatmapCell {
        &self.cells[ix * self.bins_y() + iy]
    }

    pub fn total(&self) -> usize {
        self.cells.iter().map(|c| c.count).sum()
    }
}
