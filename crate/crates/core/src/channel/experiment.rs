use std::fmt::Write as _;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{run_trial, ChannelConfig, ChannelError, ReorderModel};
use crate::keyed::SraConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Loss,
    Reorder,
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "loss" => Ok(Axis::Loss),
            "reorder" => Ok(Axis::Reorder),
            _ => Err(format!("unknown axis {s:?} (loss|reorder)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BufferPolicy {
    /// ⌈n/2⌉
    #[default]
    Half,
    /// n−1
    Full,
}

impl BufferPolicy {
    pub fn config(self, n: usize) -> Result<SraConfig, ChannelError> {
        let c = match self {
            BufferPolicy::Half => SraConfig::new(n),
            BufferPolicy::Full => SraConfig::full_buffer(n),
        };
        c.map_err(|e| ChannelError::InvalidGrid(e.to_string()))
    }
}

impl FromStr for BufferPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "half" => Ok(BufferPolicy::Half),
            "full" => Ok(BufferPolicy::Full),
            _ => Err(format!("unknown buffer policy {s:?} (half|full)")),
        }
    }
}

impl FromStr for ReorderModel {
    type Err = String;

    /// `adjacent` or `displacement:<max_d>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "adjacent" {
            return Ok(ReorderModel::AdjacentSwap);
        }
        if let Some(d) = s.strip_prefix("displacement:") {
            return match d.parse::<usize>() {
                Ok(max_d) if max_d >= 1 => Ok(ReorderModel::Displacement { max_d }),
                _ => Err(format!("bad displacement bound {d:?}")),
            };
        }
        Err(format!("unknown model {s:?} (adjacent|displacement:<d>)"))
    }
}

/// One experiment: every (key size, rate) pair on one impairment axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentGrid {
    pub axis: Axis,
    pub key_sizes: Vec<usize>,
    pub rates: Vec<f64>,
    pub runs: usize,
    pub rounds: usize,
    pub seed: u64,
    pub model: ReorderModel,
    pub buffer: BufferPolicy,
}

pub const DEFAULT_KEY_SIZES: [usize; 7] = [5, 10, 15, 20, 50, 100, 200];

impl ExperimentGrid {
    pub fn loss() -> Self {
        ExperimentGrid {
            axis: Axis::Loss,
            key_sizes: DEFAULT_KEY_SIZES.to_vec(),
            rates: vec![0.10, 0.15, 0.20, 0.25],
            runs: 100,
            rounds: 4,
            seed: 0,
            model: ReorderModel::AdjacentSwap,
            buffer: BufferPolicy::Half,
        }
    }

    pub fn reorder() -> Self {
        ExperimentGrid {
            axis: Axis::Reorder,
            rates: vec![0.10, 0.35, 0.50, 0.60, 0.70],
            ..ExperimentGrid::loss()
        }
    }

    pub fn for_axis(axis: Axis) -> Self {
        match axis {
            Axis::Loss => ExperimentGrid::loss(),
            Axis::Reorder => ExperimentGrid::reorder(),
        }
    }

    fn validate(&self) -> Result<(), ChannelError> {
        let bad = |s: &str| Err(ChannelError::InvalidGrid(s.into()));
        if self.key_sizes.is_empty() {
            return bad("no key sizes");
        }
        if self.rates.is_empty() {
            return bad("no rates");
        }
        if self.runs == 0 {
            return bad("runs must be at least 1");
        }
        if self.rounds == 0 {
            return bad("rounds must be at least 1");
        }
        if self.runs >= 1 << 24 {
            return bad("runs must be below 2^24");
        }
        for &n in &self.key_sizes {
            if n < 2 {
                return bad("key sizes must be at least 2");
            }
            if n >= 1 << 24 {
                return bad("key sizes must be below 2^24");
            }
        }
        for &r in &self.rates {
            if !(0.0..=1.0).contains(&r) {
                return bad("rates must lie in [0, 1]");
            }
        }
        Ok(())
    }

    fn channel(&self, rate: f64) -> Result<ChannelConfig, ChannelError> {
        match self.axis {
            Axis::Loss => ChannelConfig::new(rate, 0.0, self.model, self.seed),
            Axis::Reorder => ChannelConfig::new(0.0, rate, self.model, self.seed),
        }
    }
}

/// The ChaCha stream for one trial depends only on the axis, key size,
/// rate and run index, so a cell gives the same numbers whatever else is
/// in the grid and however the trials are scheduled.
fn stream_id(axis: Axis, n: usize, rate: f64, run: usize) -> u64 {
    let axis_bit = match axis {
        Axis::Loss => 0,
        Axis::Reorder => 1u64 << 63,
    };
    let rate_bp = (rate * 10_000.0).round() as u64; // ≤ 10_000 < 2^14
    axis_bit | (n as u64) << 38 | rate_bp << 24 | run as u64
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub n: usize,
    pub rate_nominal: f64,
    pub rate_realized_mean: f64,
    pub efficiency_mean: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResults {
    pub axis: Axis,
    pub key_sizes: Vec<usize>,
    pub rates: Vec<f64>,
    /// Key-size major, rate minor.
    pub cells: Vec<CellResult>,
}

impl ExperimentResults {
    pub fn get(&self, n: usize, rate: f64) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.n == n && (c.rate_nominal - rate).abs() < 1e-9)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record([
            "n",
            "rate_nominal",
            "rate_realized_mean",
            "efficiency_mean",
            "runs",
        ])
        .expect("write to Vec");
        for c in &self.cells {
            w.write_record([
                c.n.to_string(),
                format!("{:.4}", c.rate_nominal),
                format!("{:.6}", c.rate_realized_mean),
                format!("{:.6}", c.efficiency_mean),
                c.runs.to_string(),
            ])
            .expect("write to Vec");
        }
        String::from_utf8(w.into_inner().expect("flush Vec")).expect("ascii")
    }

    /// Key sizes down, rates across, efficiencies in percent.
    pub fn to_table(&self) -> String {
        let mut out = String::from("       ");
        for r in &self.rates {
            let _ = write!(out, "{:>9}", format!("{:.0}%", r * 100.0));
        }
        out.push('\n');
        for &n in &self.key_sizes {
            let _ = write!(out, "{:<7}", format!("n={n}"));
            for &r in &self.rates {
                let e = self.get(n, r).map_or(f64::NAN, |c| c.efficiency_mean);
                let _ = write!(out, "{:>9}", format!("{:.2}%", e * 100.0));
            }
            out.push('\n');
        }
        out
    }
}

/// Runs every cell of the grid. Trials run in parallel; results are summed
/// in run order so the output does not depend on thread count.
pub fn run_experiment(grid: &ExperimentGrid) -> Result<ExperimentResults, ChannelError> {
    grid.validate()?;
    let mut cells_spec = Vec::new();
    for &n in &grid.key_sizes {
        for &rate in &grid.rates {
            cells_spec.push((grid.buffer.config(n)?, grid.channel(rate)?, n, rate));
        }
    }
    let trials: Vec<(usize, usize)> = (0..cells_spec.len())
        .flat_map(|c| (0..grid.runs).map(move |r| (c, r)))
        .collect();
    let outcomes: Vec<(f64, f64)> = trials
        .par_iter()
        .map(|&(c, run)| {
            let (sra, channel, n, rate) = &cells_spec[c];
            let mut rng = ChaCha8Rng::seed_from_u64(grid.seed);
            rng.set_stream(stream_id(grid.axis, *n, *rate, run));
            let t = run_trial(*sra, grid.rounds, channel, &mut rng);
            (t.efficiency, t.realized_rate)
        })
        .collect();

    let cells = cells_spec
        .iter()
        .zip(outcomes.chunks(grid.runs))
        .map(|(&(_, _, n, rate), chunk)| {
            let (mut eff, mut realized) = (0.0, 0.0);
            for &(e, r) in chunk {
                eff += e;
                realized += r;
            }
            CellResult {
                n,
                rate_nominal: rate,
                rate_realized_mean: realized / grid.runs as f64,
                efficiency_mean: eff / grid.runs as f64,
                runs: grid.runs,
            }
        })
        .collect();
    Ok(ExperimentResults {
        axis: grid.axis,
        key_sizes: grid.key_sizes.clone(),
        rates: grid.rates.clone(),
        cells,
    })
}

fn parse_list<T: FromStr>(v: &str) -> Result<Vec<T>, String> {
    v.split(',')
        .map(|x| x.trim().parse().map_err(|_| format!("bad list item {x:?}")))
        .collect()
}

/// Reads `key=value` lines (`#` comments allowed) over the defaults of
/// the named axis. Keys: axis, key_sizes, rates, runs, rounds, seed,
/// model, buffer.
pub fn parse_experiment_config(text: &str) -> Result<ExperimentGrid, ChannelError> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ChannelError::Config {
            line: i + 1,
            reason: "expected key=value".into(),
        })?;
        entries.push((i + 1, k.trim(), v.trim()));
    }
    let axis = match entries.iter().find(|e| e.1 == "axis") {
        Some(&(line, _, v)) => v
            .parse()
            .map_err(|reason| ChannelError::Config { line, reason })?,
        None => Axis::Loss,
    };
    let mut grid = ExperimentGrid::for_axis(axis);
    for (line, k, v) in entries {
        let err = |reason: String| ChannelError::Config { line, reason };
        let num = |v: &str| {
            v.parse::<u64>()
                .map_err(|_| err(format!("bad number {v:?}")))
        };
        match k {
            "axis" => {}
            "key_sizes" => grid.key_sizes = parse_list(v).map_err(err)?,
            "rates" => grid.rates = parse_list(v).map_err(err)?,
            "runs" => grid.runs = num(v)? as usize,
            "rounds" => grid.rounds = num(v)? as usize,
            "seed" => grid.seed = num(v)?,
            "model" => grid.model = v.parse().map_err(err)?,
            "buffer" => grid.buffer = v.parse().map_err(err)?,
            _ => return Err(err(format!("unknown key {k:?}"))),
        }
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(axis: Axis) -> ExperimentGrid {
        ExperimentGrid {
            key_sizes: vec![5, 20],
            runs: 20,
            ..ExperimentGrid::for_axis(axis)
        }
    }

    #[test]
    fn empty_axes_rejected() {
        let mut g = small(Axis::Loss);
        g.rates.clear();
        assert!(matches!(
            run_experiment(&g),
            Err(ChannelError::InvalidGrid(_))
        ));
        let mut g = small(Axis::Loss);
        g.key_sizes.clear();
        assert!(matches!(
            run_experiment(&g),
            Err(ChannelError::InvalidGrid(_))
        ));
        let mut g = small(Axis::Loss);
        g.runs = 0;
        assert!(run_experiment(&g).is_err());
    }

    #[test]
    fn zero_rate_is_exact() {
        for axis in [Axis::Loss, Axis::Reorder] {
            let g = ExperimentGrid {
                rates: vec![0.0],
                runs: 5,
                ..ExperimentGrid::for_axis(axis)
            };
            let res = run_experiment(&g).unwrap();
            assert!(res.cells.iter().all(|c| c.efficiency_mean == 1.0));
            assert!(res.cells.iter().all(|c| c.rate_realized_mean == 0.0));
        }
    }

    #[test]
    fn deterministic_and_shape_independent() {
        let g = small(Axis::Reorder);
        let a = run_experiment(&g).unwrap();
        assert_eq!(a.to_csv(), run_experiment(&g).unwrap().to_csv());
        assert_eq!(a.cells.len(), 2 * 5);
        // a one-cell grid reproduces the matching cell of the bigger one
        let one = ExperimentGrid {
            key_sizes: vec![20],
            rates: vec![0.5],
            ..g.clone()
        };
        let solo = run_experiment(&one).unwrap();
        assert_eq!(solo.cells[0], *a.get(20, 0.5).unwrap());
    }

    #[test]
    fn csv_layout() {
        let res = run_experiment(&small(Axis::Loss)).unwrap();
        let csv = res.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "n,rate_nominal,rate_realized_mean,efficiency_mean,runs"
        );
        assert_eq!(lines.len(), 1 + 2 * 4);
        assert!(lines[1].starts_with("5,0.1000,"));
        assert!(lines[1].ends_with(",20"));
        let table = res.to_table();
        assert!(table.lines().nth(1).unwrap().starts_with("n=5"));
        assert_eq!(table.lines().count(), 3);
    }

    #[test]
    fn realized_rate_tracks_nominal() {
        let g = ExperimentGrid {
            key_sizes: vec![200],
            rates: vec![0.2],
            runs: 50,
            ..ExperimentGrid::loss()
        };
        let c = &run_experiment(&g).unwrap().cells[0];
        assert!(
            (c.rate_realized_mean - 0.2).abs() < 0.01,
            "{}",
            c.rate_realized_mean
        );
    }

    #[test]
    fn config_file() {
        let g = parse_experiment_config(
            "# reorder sweep\naxis = reorder\nkey_sizes=5, 10\nrates=0.5\nruns=7\nseed=3\nmodel=displacement:4\nbuffer=full\n",
        )
        .unwrap();
        assert_eq!(g.axis, Axis::Reorder);
        assert_eq!(g.key_sizes, vec![5, 10]);
        assert_eq!(g.rates, vec![0.5]);
        assert_eq!((g.runs, g.seed, g.rounds), (7, 3, 4));
        assert_eq!(g.model, ReorderModel::Displacement { max_d: 4 });
        assert_eq!(g.buffer, BufferPolicy::Full);

        let d = parse_experiment_config("").unwrap();
        assert_eq!(d, ExperimentGrid::loss());
        assert_eq!(
            parse_experiment_config("axis=reorder").unwrap().rates.len(),
            5
        );
        assert!(matches!(
            parse_experiment_config("runs=x"),
            Err(ChannelError::Config { line: 1, .. })
        ));
        assert!(parse_experiment_config("colour=blue").is_err());
        assert!(parse_experiment_config("no equals").is_err());
        assert!(parse_experiment_config("model=displacement:0").is_err());
    }
}
