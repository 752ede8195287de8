//! Datasets: libsvm ingestion, min-max standardization and synthetic
//! regression problems.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::seed;
use crate::subsampling::sample_indices;

/// Dense row-major `rows × cols` matrix of input points.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl FeatureMatrix {
    pub fn new(data: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::input(format!(
                "feature buffer of length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(FeatureMatrix { data, rows, cols })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::input("rows have different lengths"));
        }
        let n = rows.len();
        Self::new(rows.into_iter().flatten().collect(), n, cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            data,
            rows: indices.len(),
            cols: self.cols,
        }
    }
}

/// Regression samples `(x_i, y_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: FeatureMatrix,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: FeatureMatrix, y: Vec<f64>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::input("dataset must contain at least one sample"));
        }
        if x.rows() != y.len() {
            return Err(Error::input(format!(
                "{} feature rows but {} targets",
                x.rows(),
                y.len()
            )));
        }
        if x.as_slice().iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::input("dataset contains non-finite values"));
        }
        Ok(Dataset { x, y })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        Self::new(FeatureMatrix::from_rows(rows)?, y)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn x(&self) -> &FeatureMatrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.x.row(i)
    }

    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        if indices.is_empty() {
            return Err(Error::input("selection is empty"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n()) {
            return Err(Error::input(format!("index {bad} out of range for n={}", self.n())));
        }
        Ok(Dataset {
            x: self.x.select(indices),
            y: indices.iter().map(|&i| self.y[i]).collect(),
        })
    }

    /// Splits off `test_size` uniformly chosen samples. Returns `(train, test)`.
    pub fn train_test_split(&self, test_size: usize, seed: u64) -> Result<(Dataset, Dataset)> {
        if test_size == 0 || test_size >= self.n() {
            return Err(Error::input(format!(
                "test split of {test_size} needs 1 <= size < n={}",
                self.n()
            )));
        }
        let test = sample_indices(self.n(), test_size, seed)?;
        let mut is_test = vec![false; self.n()];
        for &i in &test {
            is_test[i] = true;
        }
        let train: Vec<usize> = (0..self.n()).filter(|&i| !is_test[i]).collect();
        Ok((self.select(&train)?, self.select(&test)?))
    }
}

/// Parses the libsvm text format: `<label> <idx>:<val> ...` with 1-based,
/// strictly increasing indices. Absent indices are zero, `#` starts a
/// comment and blank lines are skipped. The feature dimension is the
/// largest index seen.
pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut labels = Vec::new();
    let mut sparse_rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut dim = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: lineno,
            message,
        };
        let mut tokens = content.split_whitespace();
        let label_token = tokens.next().unwrap_or_default();
        let label = parse_real(label_token).ok_or_else(|| err(format!("bad label `{label_token}`")))?;
        let mut entries = Vec::new();
        let mut last = 0usize;
        for token in tokens {
            let (idx, val) = token
                .split_once(':')
                .ok_or_else(|| err(format!("expected idx:val, got `{token}`")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| err(format!("bad feature index `{idx}`")))?;
            if idx < 1 {
                return Err(err("feature indices are 1-based".into()));
            }
            if idx <= last {
                return Err(err(format!("index {idx} does not increase past {last}")));
            }
            let val = parse_real(val).ok_or_else(|| err(format!("bad feature value `{val}`")))?;
            last = idx;
            entries.push((idx - 1, val));
        }
        dim = dim.max(last);
        labels.push(label);
        sparse_rows.push(entries);
    }
    let n = labels.len();
    let mut data = vec![0.0; n * dim];
    for (i, row) in sparse_rows.iter().enumerate() {
        for &(j, v) in row {
            data[i * dim + j] = v;
        }
    }
    Dataset::new(FeatureMatrix::new(data, n, dim)?, labels)
}

fn parse_real(token: &str) -> Option<f64> {
    // accept a leading unicode minus as written by some tools
    let normalized = token.replace('\u{2212}', "-");
    normalized.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Writes a dataset in libsvm format. Zero features are omitted and values
/// use the shortest round-tripping representation.
pub fn write_libsvm<W: Write>(data: &Dataset, mut out: W) -> std::io::Result<()> {
    for i in 0..data.n() {
        write!(out, "{:?}", data.y[i])?;
        for (j, &v) in data.row(i).iter().enumerate() {
            if v != 0.0 {
                write!(out, " {}:{:?}", j + 1, v)?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Min-max map of every feature and the target onto `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    feature_min: Vec<f64>,
    feature_max: Vec<f64>,
    target_min: f64,
    target_max: f64,
}

#[inline]
fn to_unit(v: f64, min: f64, max: f64) -> f64 {
    if max > min {
        2.0 * (v - min) / (max - min) - 1.0
    } else {
        0.0
    }
}

impl Scaler {
    pub fn fit(data: &Dataset) -> Scaler {
        let p = data.p();
        let mut feature_min = vec![f64::INFINITY; p];
        let mut feature_max = vec![f64::NEG_INFINITY; p];
        for i in 0..data.n() {
            for (j, &v) in data.row(i).iter().enumerate() {
                feature_min[j] = feature_min[j].min(v);
                feature_max[j] = feature_max[j].max(v);
            }
        }
        let target_min = data.y.iter().copied().fold(f64::INFINITY, f64::min);
        let target_max = data.y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Scaler {
            feature_min,
            feature_max,
            target_min,
            target_max,
        }
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        let p = self.feature_min.len();
        if data.p() != p {
            return Err(Error::input(format!(
                "scaler fitted on {p} features, data has {}",
                data.p()
            )));
        }
        let mut x = Vec::with_capacity(data.n() * p);
        for i in 0..data.n() {
            for (j, &v) in data.row(i).iter().enumerate() {
                x.push(to_unit(v, self.feature_min[j], self.feature_max[j]));
            }
        }
        let y = data
            .y
            .iter()
            .map(|&v| to_unit(v, self.target_min, self.target_max))
            .collect();
        Dataset::new(FeatureMatrix::new(x, data.n(), p)?, y)
    }

    /// Maps a standardized target back to the original scale. A constant
    /// target maps back to that constant.
    pub fn invert_target(&self, value: f64) -> f64 {
        if self.target_max > self.target_min {
            (value + 1.0) * (self.target_max - self.target_min) / 2.0 + self.target_min
        } else {
            self.target_min
        }
    }
}

/// Ground-truth regression function for synthetic data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truth {
    /// `sin(2π x₁)`, using the first coordinate.
    Sin2Pi,
    /// One draw from a zero-mean GP with Gaussian kernel bandwidth `h0`.
    GpSample { h0: f64 },
}

impl Truth {
    /// Closed-form value, when the truth has one.
    pub fn eval(&self, x: &[f64]) -> Option<f64> {
        match self {
            Truth::Sin2Pi => Some((2.0 * PI * x[0]).sin()),
            Truth::GpSample { .. } => None,
        }
    }
}

impl fmt::Display for Truth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Truth::Sin2Pi => write!(f, "sin2pi"),
            Truth::GpSample { h0 } => write!(f, "gp-sample:{h0:?}"),
        }
    }
}

impl FromStr for Truth {
    type Err = Error;

    /// `sin2pi`, `gp-sample` (h₀ = 1) or `gp-sample:<h0>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sin2pi" => Ok(Truth::Sin2Pi),
            "gp-sample" => Ok(Truth::GpSample { h0: 1.0 }),
            other => {
                let h0 = other
                    .strip_prefix("gp-sample:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .filter(|h| h.is_finite() && *h > 0.0)
                    .ok_or_else(|| Error::input(format!("unknown synthetic truth `{other}`")))?;
                Ok(Truth::GpSample { h0 })
            }
        }
    }
}

/// Synthetic samples together with the noiseless truth at each input.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub data: Dataset,
    pub noiseless: Vec<f64>,
}

/// Draws `n` inputs uniformly from `[-1,1]^p` and sets
/// `y_i = f*(x_i) + ξ_i` with `ξ_i ~ N(0, noise_std²)`.
pub fn synthetic_regression(
    truth: Truth,
    n: usize,
    noise_std: f64,
    p: usize,
    seed: u64,
) -> Result<Synthetic> {
    if n == 0 || p == 0 {
        return Err(Error::input("synthetic data needs n >= 1 and p >= 1"));
    }
    if !(noise_std.is_finite() && noise_std >= 0.0) {
        return Err(Error::input("noise level must be a nonnegative real"));
    }
    let mut rng = seed::rng(seed);
    let xs: Vec<f64> = (0..n * p).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let x = FeatureMatrix::new(xs, n, p)?;
    let noiseless: Vec<f64> = match truth {
        Truth::Sin2Pi => (0..n).map(|i| (2.0 * PI * x.row(i)[0]).sin()).collect(),
        Truth::GpSample { h0 } => gp_draw(&KernelSpec::gaussian(h0), &x, &mut rng),
    };
    let y = noiseless
        .iter()
        .map(|f| {
            let z: f64 = StandardNormal.sample(&mut rng);
            f + noise_std * z
        })
        .collect();
    Ok(Synthetic {
        data: Dataset::new(x, y)?,
        noiseless,
    })
}

/// One sample of `N(0, K)` at the given points, through a pivoted
/// Cholesky factor that stops once the residual diagonal falls below
/// `1e-12` of the largest prior variance.
fn gp_draw(kernel: &KernelSpec, x: &FeatureMatrix, rng: &mut seed::Rng) -> Vec<f64> {
    let n = x.rows();
    let mut residual: Vec<f64> = (0..n).map(|i| kernel.value(x.row(i), x.row(i))).collect();
    let tol = 1e-12 * residual.iter().copied().fold(0.0, f64::max);
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut pivots: Vec<usize> = Vec::new();
    while columns.len() < n {
        let (pivot, &d) = residual
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("n >= 1");
        if d <= tol {
            break;
        }
        let root = d.sqrt();
        let xp = x.row(pivot);
        let col: Vec<f64> = (0..n)
            .map(|j| {
                let correction: f64 = columns.iter().map(|c| c[j] * c[pivot]).sum();
                (kernel.value(x.row(j), xp) - correction) / root
            })
            .collect();
        for (r, c) in residual.iter_mut().zip(&col) {
            *r -= c * c;
        }
        for &q in pivots.iter().chain(std::iter::once(&pivot)) {
            residual[q] = 0.0;
        }
        pivots.push(pivot);
        columns.push(col);
    }
    let z: Vec<f64> = (0..columns.len())
        .map(|_| StandardNormal.sample(&mut *rng))
        .collect();
    (0..n)
        .map(|j| columns.iter().zip(&z).map(|(c, zk)| c[j] * zk).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_spec_examples() {
        let d = parse_libsvm("1 1:0.5 3:2\n".as_bytes()).unwrap();
        assert_eq!(d.y(), &[1.0]);
        assert_eq!(d.row(0), &[0.5, 0.0, 2.0]);

        let d = parse_libsvm("-1\n".as_bytes()).unwrap();
        assert_eq!(d.y(), &[-1.0]);
        assert_eq!(d.p(), 0);

        let d = parse_libsvm("\u{2212}1 2:3 # trailing\n\n# only a comment\n2 1:1\n".as_bytes())
            .unwrap();
        assert_eq!(d.n(), 2);
        assert_eq!(d.row(0), &[0.0, 3.0]);
        assert_eq!(d.row(1), &[1.0, 0.0]);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases = [
            ("1 2:a\n", 1),
            ("1 1:1\nx 1:1\n", 2),
            ("1 3:1 2:1\n", 1),
            ("1 0:1\n", 1),
            ("1 1:1\n1 1:2 1:3\n", 2),
            ("1 12\n", 1),
        ];
        for (text, line) in cases {
            match parse_libsvm(text.as_bytes()) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?} gave {other:?}"),
            }
        }
        assert!(matches!(parse_libsvm("".as_bytes()), Err(Error::Input(_))));
    }

    #[test]
    fn scaler_examples() {
        let d = Dataset::from_rows(
            vec![vec![0.0, 5.0], vec![10.0, 5.0], vec![5.0, 5.0]],
            vec![1.0, 3.0, 2.0],
        )
        .unwrap();
        let scaler = Scaler::fit(&d);
        let t = scaler.apply(&d).unwrap();
        assert_eq!(t.row(0), &[-1.0, 0.0]);
        assert_eq!(t.row(1), &[1.0, 0.0]);
        assert_eq!(t.row(2), &[0.0, 0.0]);
        assert_eq!(t.y(), &[-1.0, 1.0, 0.0]);
        assert_eq!(scaler.invert_target(1.0), 3.0);

        let wrong = Dataset::from_rows(vec![vec![1.0]], vec![0.0]).unwrap();
        assert!(matches!(scaler.apply(&wrong), Err(Error::Input(_))));
    }

    #[test]
    fn constant_target_inverts_to_constant() {
        let d = Dataset::from_rows(vec![vec![1.0], vec![2.0]], vec![4.0, 4.0]).unwrap();
        let s = Scaler::fit(&d);
        assert_eq!(s.apply(&d).unwrap().y(), &[0.0, 0.0]);
        assert_eq!(s.invert_target(0.0), 4.0);
    }

    #[test]
    fn synthetic_noiseless_sin() {
        let syn = synthetic_regression(Truth::Sin2Pi, 50, 0.0, 2, 3).unwrap();
        for i in 0..50 {
            assert_eq!(syn.data.y()[i], syn.noiseless[i]);
            assert_eq!(syn.noiseless[i], Truth::Sin2Pi.eval(syn.data.row(i)).unwrap());
        }
        assert_eq!(Truth::Sin2Pi.eval(&[0.25]), Some(1.0));
    }

    #[test]
    fn synthetic_is_seeded() {
        let a = synthetic_regression(Truth::GpSample { h0: 0.5 }, 80, 0.1, 1, 11).unwrap();
        let b = synthetic_regression(Truth::GpSample { h0: 0.5 }, 80, 0.1, 1, 11).unwrap();
        let c = synthetic_regression(Truth::GpSample { h0: 0.5 }, 80, 0.1, 1, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.data.x().as_slice().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn noise_variance_matches() {
        // Monte Carlo moment check: sample variance of y - f* against nu².
        let nu = 0.3;
        let syn = synthetic_regression(Truth::Sin2Pi, 100_000, nu, 1, 5).unwrap();
        let res: Vec<f64> = syn
            .data
            .y()
            .iter()
            .zip(&syn.noiseless)
            .map(|(y, f)| y - f)
            .collect();
        let mean = res.iter().sum::<f64>() / res.len() as f64;
        let var = res.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (res.len() - 1) as f64;
        assert!((var / (nu * nu) - 1.0).abs() < 0.03, "variance {var}");
    }

    #[test]
    fn gp_sample_has_unit_prior_variance() {
        // Across many independent draws the empirical variance of f*(x) is k(x,x) = 1
        // and neighbouring inputs are strongly correlated.
        let mut sq = 0.0;
        let draws = 400;
        for s in 0..draws {
            let syn = synthetic_regression(Truth::GpSample { h0: 1.0 }, 30, 0.0, 1, s).unwrap();
            sq += syn.noiseless.iter().map(|f| f * f).sum::<f64>() / 30.0;
        }
        let var = sq / draws as f64;
        assert!((var - 1.0).abs() < 0.15, "prior variance {var}");
    }

    #[test]
    fn truth_names_parse() {
        assert_eq!("sin2pi".parse::<Truth>().unwrap(), Truth::Sin2Pi);
        assert_eq!("gp-sample".parse::<Truth>().unwrap(), Truth::GpSample { h0: 1.0 });
        let t: Truth = "gp-sample:0.25".parse().unwrap();
        assert_eq!(t.to_string().parse::<Truth>().unwrap(), t);
        assert!("gp-sample:-1".parse::<Truth>().is_err());
    }

    #[test]
    fn train_test_split_partitions() {
        let syn = synthetic_regression(Truth::Sin2Pi, 40, 0.1, 1, 1).unwrap();
        let (train, test) = syn.data.train_test_split(10, 9).unwrap();
        assert_eq!((train.n(), test.n()), (30, 10));
        assert!(syn.data.train_test_split(40, 9).is_err());
    }

    proptest! {
        #[test]
        fn scaled_values_in_unit_box_and_invert(
            rows in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 3), 2..30),
            ys in prop::collection::vec(-1e3f64..1e3, 30),
        ) {
            let n = rows.len();
            let y: Vec<f64> = ys[..n].to_vec();
            let d = Dataset::from_rows(rows, y.clone()).unwrap();
            let s = Scaler::fit(&d);
            let t = s.apply(&d).unwrap();
            prop_assert!(t.x().as_slice().iter().chain(t.y()).all(|v| (-1.0..=1.0).contains(v)));
            for (orig, scaled) in y.iter().zip(t.y()) {
                let back = s.invert_target(*scaled);
                prop_assert!((back - orig).abs() <= 1e-12 * orig.abs().max(1.0));
            }
        }

        #[test]
        fn libsvm_round_trips(
            rows in prop::collection::vec(prop::collection::vec(prop_oneof![Just(0.0), -5.0f64..5.0], 4), 1..20),
            ys in prop::collection::vec(-5.0f64..5.0, 20),
        ) {
            let mut rows = rows;
            for r in rows.iter_mut() {
                // pin the dimension: the last feature is never omitted
                r[3] = 1.5;
            }
            let n = rows.len();
            let d = Dataset::from_rows(rows, ys[..n].to_vec()).unwrap();
            let mut buf = Vec::new();
            write_libsvm(&d, &mut buf).unwrap();
            prop_assert_eq!(parse_libsvm(buf.as_slice()).unwrap(), d);
        }
    }
}
