//! Dataset representation, CSV/graph ingestion, and column standardization.
//!
//! Covariates live in a column-major matrix; the response is continuous,
//! binary, or right-censored survival. An optional undirected predictor
//! graph feeds the structured prior.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::DataError;
use crate::mat::Matrix;

/// Response vector, one variant per model family.
#[derive(Debug, Clone, PartialEq)]
pub enum ResponseVec {
    Continuous(Vec<f64>),
    /// Values in {0,1}; at least one of each.
    Binary(Vec<u8>),
    /// Positive observed times with event indicators; at least one event.
    Survival {
        time: Vec<f64>,
        status: Vec<u8>,
    },
}

impl ResponseVec {
    pub fn len(&self) -> usize {
        match self {
            ResponseVec::Continuous(y) => y.len(),
            ResponseVec::Binary(y) => y.len(),
            ResponseVec::Survival { time, .. } => time.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ResponseVec::Continuous(_) => "continuous",
            ResponseVec::Binary(_) => "binary",
            ResponseVec::Survival { .. } => "survival",
        }
    }

    fn validate(&self) -> Result<(), DataError> {
        match self {
            ResponseVec::Continuous(_) => Ok(()),
            ResponseVec::Binary(y) => {
                if y.contains(&0) && y.contains(&1) {
                    Ok(())
                } else {
                    Err(DataError::DegenerateBinary)
                }
            }
            ResponseVec::Survival { time, status } => {
                for (i, &t) in time.iter().enumerate() {
                    // NaN must fail this check too.
                    if t.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
                        return Err(DataError::NonPositiveTime { row: i, value: t });
                    }
                }
                if status.contains(&1) {
                    Ok(())
                } else {
                    Err(DataError::NoEvents)
                }
            }
        }
    }
}

/// Undirected simple graph over predictor indices, stored as deduplicated
/// edges with j < l.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeList {
    edges: Vec<(usize, usize)>,
}

impl EdgeList {
    /// Normalizes, rejects self-loops, and silently drops duplicate edges.
    pub fn new(raw: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, DataError> {
        let mut seen = HashSet::new();
        let mut edges = Vec::new();
        for (a, b) in raw {
            if a == b {
                return Err(DataError::SelfLoop(a));
            }
            let e = (a.min(b), a.max(b));
            if seen.insert(e) {
                edges.push(e);
            }
        }
        edges.sort_unstable();
        Ok(Self { edges })
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.edges.iter().map(|&(_, b)| b).max()
    }

    /// Neighbor lists for p predictors.
    pub fn adjacency(&self, p: usize) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); p];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    /// Number of connected components among p nodes (isolated nodes count).
    pub fn n_components(&self, p: usize) -> usize {
        let adj = self.adjacency(p);
        let mut seen = vec![false; p];
        let mut count = 0;
        for start in 0..p {
            if seen[start] {
                continue;
            }
            count += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(v) = stack.pop() {
                for &w in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        count
    }
}

/// Validated modeling dataset: covariates, response, names, optional graph.
///
/// Immutable after construction; shared freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Matrix,
    response: ResponseVec,
    names: Vec<String>,
    graph: Option<EdgeList>,
}

impl Dataset {
    pub fn new(
        x: Matrix,
        response: ResponseVec,
        names: Vec<String>,
        graph: Option<EdgeList>,
    ) -> Result<Self, DataError> {
        let (n, p) = (x.n_rows(), x.n_cols());
        if n < 2 || p < 1 {
            return Err(DataError::TooSmall { n, p });
        }
        assert_eq!(response.len(), n, "response length mismatch");
        assert_eq!(names.len(), p, "names length mismatch");
        for j in 0..p {
            if let Some(i) = x.col(j).iter().position(|v| !v.is_finite()) {
                return Err(DataError::NonFinite {
                    row: i,
                    column: names[j].clone(),
                });
            }
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(DataError::DuplicateName(name.clone()));
            }
        }
        response.validate()?;
        if let Some(g) = &graph {
            if let Some(max) = g.max_index() {
                if max >= p {
                    return Err(DataError::GraphIndexOutOfRange { index: max, p });
                }
            }
        }
        Ok(Self {
            x,
            response,
            names,
            graph,
        })
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn response(&self) -> &ResponseVec {
        &self.response
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn graph(&self) -> Option<&EdgeList> {
        self.graph.as_ref()
    }

    pub fn with_graph(mut self, graph: Option<EdgeList>) -> Result<Self, DataError> {
        if let Some(g) = &graph {
            if let Some(max) = g.max_index() {
                if max >= self.n_predictors() {
                    return Err(DataError::GraphIndexOutOfRange {
                        index: max,
                        p: self.n_predictors(),
                    });
                }
            }
        }
        self.graph = graph;
        Ok(self)
    }

    pub fn n_obs(&self) -> usize {
        self.x.n_rows()
    }

    pub fn n_predictors(&self) -> usize {
        self.x.n_cols()
    }

    /// Row subset as a new dataset (for cross-validation folds). Fails when
    /// the subset violates a response invariant, e.g. a one-class binary
    /// fold.
    pub fn subset_rows(&self, rows: &[usize]) -> Result<Self, DataError> {
        let cols: Vec<Vec<f64>> = (0..self.n_predictors())
            .map(|j| {
                let col = self.x.col(j);
                rows.iter().map(|&i| col[i]).collect()
            })
            .collect();
        let response = match &self.response {
            ResponseVec::Continuous(y) => {
                ResponseVec::Continuous(rows.iter().map(|&i| y[i]).collect())
            }
            ResponseVec::Binary(y) => ResponseVec::Binary(rows.iter().map(|&i| y[i]).collect()),
            ResponseVec::Survival { time, status } => ResponseVec::Survival {
                time: rows.iter().map(|&i| time[i]).collect(),
                status: rows.iter().map(|&i| status[i]).collect(),
            },
        };
        Dataset::new(
            Matrix::from_columns(cols),
            response,
            self.names.clone(),
            self.graph.clone(),
        )
    }
}

/// Which header columns carry the response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResponseSpec {
    Continuous { column: String },
    Binary { column: String },
    Survival { time: String, status: String },
}

impl ResponseSpec {
    fn columns(&self) -> Vec<&str> {
        match self {
            ResponseSpec::Continuous { column } | ResponseSpec::Binary { column } => {
                vec![column.as_str()]
            }
            ResponseSpec::Survival { time, status } => vec![time.as_str(), status.as_str()],
        }
    }
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<f64, DataError> {
    let trimmed = raw.trim();
    if trimmed.is_empty() || trimmed.eq_ignore_ascii_case("na") {
        return Err(DataError::MissingValue {
            row,
            column: column.to_string(),
        });
    }
    let v: f64 = trimmed.parse().map_err(|_| DataError::NonNumeric {
        row,
        column: column.to_string(),
        value: trimmed.to_string(),
    })?;
    if !v.is_finite() {
        return Err(DataError::NonFinite {
            row,
            column: column.to_string(),
        });
    }
    Ok(v)
}

fn to_binary(v: f64, row: usize) -> Result<u8, DataError> {
    if v == 0.0 {
        Ok(0)
    } else if v == 1.0 {
        Ok(1)
    } else {
        Err(DataError::BinaryOutOfRange { row, value: v })
    }
}

/// Load a dataset from a headered CSV file. Covariates are all columns not
/// named by `response_spec`; rows with missing fields are rejected with the
/// offending row index.
pub fn load_dataset(
    data_path: impl AsRef<Path>,
    response_spec: &ResponseSpec,
    graph_path: Option<&Path>,
) -> Result<Dataset, DataError> {
    let path = data_path.as_ref();
    let path_str = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => DataError::Io {
                path: path_str.clone(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => DataError::MalformedCsv {
                path: path_str.clone(),
                message: e.to_string(),
            },
        })?;

    let header: Vec<String> = reader
        .headers()
        .map_err(|e| DataError::MalformedCsv {
            path: path_str.clone(),
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();

    let response_cols = response_spec.columns();
    for rc in &response_cols {
        if !header.iter().any(|h| h == rc) {
            return Err(DataError::MissingResponseColumn((*rc).to_string()));
        }
    }
    let covariate_idx: Vec<usize> = (0..header.len())
        .filter(|&j| !response_cols.contains(&header[j].as_str()))
        .collect();
    let names: Vec<String> = covariate_idx.iter().map(|&j| header[j].clone()).collect();
    let col_of = |name: &str| header.iter().position(|h| h == name).unwrap();

    let mut x_rows: Vec<Vec<f64>> = Vec::new();
    let mut raw_response: Vec<Vec<f64>> = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| DataError::MalformedCsv {
            path: path_str.clone(),
            message: format!("row {row}: {e}"),
        })?;
        let mut xr = Vec::with_capacity(covariate_idx.len());
        for &j in &covariate_idx {
            xr.push(parse_cell(&record[j], row, &header[j])?);
        }
        x_rows.push(xr);
        raw_response.push(
            response_cols
                .iter()
                .map(|rc| parse_cell(&record[col_of(rc)], row, rc))
                .collect::<Result<_, _>>()?,
        );
    }

    let response = match response_spec {
        ResponseSpec::Continuous { .. } => {
            ResponseVec::Continuous(raw_response.iter().map(|r| r[0]).collect())
        }
        ResponseSpec::Binary { .. } => ResponseVec::Binary(
            raw_response
                .iter()
                .enumerate()
                .map(|(row, r)| to_binary(r[0], row))
                .collect::<Result<_, _>>()?,
        ),
        ResponseSpec::Survival { .. } => {
            let mut time = Vec::with_capacity(raw_response.len());
            let mut status = Vec::with_capacity(raw_response.len());
            for (row, r) in raw_response.iter().enumerate() {
                if r[0].partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
                    return Err(DataError::NonPositiveTime { row, value: r[0] });
                }
                time.push(r[0]);
                let d = r[1];
                if d == 0.0 || d == 1.0 {
                    status.push(d as u8);
                } else {
                    return Err(DataError::StatusOutOfRange { row, value: d });
                }
            }
            ResponseVec::Survival { time, status }
        }
    };

    let graph = graph_path.map(load_graph).transpose()?;
    Dataset::new(Matrix::from_rows(&x_rows), response, names, graph)
}

/// Parse a plain-text edge list: one edge per line, two whitespace-separated
/// 0-based indices; '#' lines ignored.
pub fn load_graph(path: impl AsRef<Path>) -> Result<EdgeList, DataError> {
    let path = path.as_ref();
    let content = std::fs::read_to_string(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut raw = Vec::new();
    for (lineno, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<usize, DataError> {
            tok.and_then(|t| t.parse().ok())
                .ok_or_else(|| DataError::MalformedGraphLine {
                    line: lineno + 1,
                    content: line.to_string(),
                })
        };
        let a = parse(it.next())?;
        let b = parse(it.next())?;
        if it.next().is_some() {
            return Err(DataError::MalformedGraphLine {
                line: lineno + 1,
                content: line.to_string(),
            });
        }
        raw.push((a, b));
    }
    EdgeList::new(raw)
}

/// Serialize `x` round-trip exactly: 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write the dataset as CSV (response columns first) plus an optional graph
/// file. Numbers carry 17 significant digits so a reload is bit-exact.
pub fn write_dataset(
    dataset: &Dataset,
    data_path: impl AsRef<Path>,
    graph_path: Option<&Path>,
) -> Result<(), DataError> {
    let mut out = String::new();
    let response_header = match dataset.response() {
        ResponseVec::Continuous(_) | ResponseVec::Binary(_) => vec!["y".to_string()],
        ResponseVec::Survival { .. } => vec!["time".to_string(), "status".to_string()],
    };
    let mut header = response_header.clone();
    header.extend(dataset.names().iter().cloned());
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..dataset.n_obs() {
        let mut fields: Vec<String> = match dataset.response() {
            ResponseVec::Continuous(y) => vec![format_f64(y[i])],
            ResponseVec::Binary(y) => vec![y[i].to_string()],
            ResponseVec::Survival { time, status } => {
                vec![format_f64(time[i]), status[i].to_string()]
            }
        };
        for j in 0..dataset.n_predictors() {
            fields.push(format_f64(dataset.x().get(i, j)));
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    let path = data_path.as_ref();
    std::fs::write(path, out).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        source: e,
    })?;

    if let Some(gp) = graph_path {
        let mut g = String::new();
        match dataset.graph() {
            Some(edges) if edges.n_edges() > 0 => {
                for &(a, b) in edges.edges() {
                    let _ = writeln!(g, "{a} {b}");
                }
            }
            _ => g.push_str("# empty graph\n"),
        }
        std::fs::write(gp, g).map_err(|e| DataError::Io {
            path: gp.display().to_string(),
            source: e,
        })?;
    }
    Ok(())
}

/// Response spec matching `write_dataset` output for a given response kind.
pub fn written_response_spec(response: &ResponseVec) -> ResponseSpec {
    match response {
        ResponseVec::Continuous(_) => ResponseSpec::Continuous {
            column: "y".to_string(),
        },
        ResponseVec::Binary(_) => ResponseSpec::Binary {
            column: "y".to_string(),
        },
        ResponseVec::Survival { .. } => ResponseSpec::Survival {
            time: "time".to_string(),
            status: "status".to_string(),
        },
    }
}

/// Per-column centering/scaling transform, invertible on coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub centers: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardization {
    /// Identity transform (used when standardization is disabled).
    pub fn identity(p: usize) -> Self {
        Self {
            centers: vec![0.0; p],
            scales: vec![1.0; p],
        }
    }
}

/// Center and scale each column to mean 0, sample standard deviation 1
/// (n-1 denominator). Errors on constant columns, naming the column.
pub fn standardize(x: &Matrix, names: &[String]) -> Result<(Matrix, Standardization), DataError> {
    let n = x.n_rows();
    let p = x.n_cols();
    let mut xs = x.clone();
    let mut centers = Vec::with_capacity(p);
    let mut scales = Vec::with_capacity(p);
    for j in 0..p {
        let col = xs.col_mut(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let sd = var.sqrt();
        if sd == 0.0 {
            let name = names
                .get(j)
                .cloned()
                .unwrap_or_else(|| format!("column {j}"));
            return Err(DataError::ConstantColumn(name));
        }
        for v in col.iter_mut() {
            *v = (*v - mean) / sd;
        }
        centers.push(mean);
        scales.push(sd);
    }
    Ok((xs, Standardization { centers, scales }))
}

/// Invert `standardize` elementwise.
pub fn unstandardize(xs: &Matrix, transform: &Standardization) -> Matrix {
    let mut x = xs.clone();
    for j in 0..x.n_cols() {
        let c = transform.centers[j];
        let s = transform.scales[j];
        for v in x.col_mut(j).iter_mut() {
            *v = *v * s + c;
        }
    }
    x
}
