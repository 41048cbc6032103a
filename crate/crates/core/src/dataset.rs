//! Interaction-log ingestion, binarization, user filtering and the
//! timestamp-ordered leave-k-out split.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{LocaError, Result};

/// Role of one column in a delimited interaction file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Column {
    User,
    Item,
    Rating,
    Timestamp,
    Ignore,
}

/// Column layout of a delimited interaction file.
#[derive(Clone, Debug, PartialEq)]
pub struct Schema {
    pub delimiter: char,
    pub has_header: bool,
    pub columns: Vec<Column>,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            delimiter: ',',
            has_header: false,
            columns: vec![Column::User, Column::Item, Column::Rating, Column::Timestamp],
        }
    }
}

impl Schema {
    /// Parses a column list such as `"user,item,rating,ts"`. Recognized names
    /// are `user`, `item`, `rating`, `ts`/`timestamp` and `_`/`skip`.
    pub fn parse(columns: &str, delimiter: char, has_header: bool) -> Result<Self> {
        let columns = columns
            .split(',')
            .map(|c| match c.trim() {
                "user" => Ok(Column::User),
                "item" => Ok(Column::Item),
                "rating" => Ok(Column::Rating),
                "ts" | "timestamp" => Ok(Column::Timestamp),
                "_" | "skip" => Ok(Column::Ignore),
                other => Err(LocaError::Config(format!("unknown column name `{other}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let count = |col| columns.iter().filter(|&&c| c == col).count();
        if count(Column::User) != 1 || count(Column::Item) != 1 {
            return Err(LocaError::Config(
                "schema needs exactly one user and one item column".into(),
            ));
        }
        if count(Column::Rating) > 1 || count(Column::Timestamp) > 1 {
            return Err(LocaError::Config(
                "schema has a repeated rating or timestamp column".into(),
            ));
        }
        Ok(Schema {
            delimiter,
            has_header,
            columns,
        })
    }

    pub fn has_timestamp(&self) -> bool {
        self.columns.contains(&Column::Timestamp)
    }
}

/// One raw interaction record.
#[derive(Clone, Debug, PartialEq)]
pub struct Interaction {
    pub user: String,
    pub item: String,
    pub rating: Option<f64>,
    pub timestamp: Option<i64>,
}

/// Raw interaction records in file order. Duplicates are allowed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InteractionLog {
    pub records: Vec<Interaction>,
}

impl InteractionLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Reads a delimited interaction file.
pub fn load_interactions(path: impl AsRef<Path>, schema: &Schema) -> Result<InteractionLog> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| LocaError::io(path, e))?;
    parse_interactions(&text, schema)
}

/// Parses interaction records from in-memory text. Line numbers in errors are
/// 1-based and count the header row when present.
pub fn parse_interactions(text: &str, schema: &Schema) -> Result<InteractionLog> {
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if idx == 0 && schema.has_header {
            continue;
        }
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(schema.delimiter).collect();
        if fields.len() != schema.columns.len() {
            return Err(LocaError::MalformedRow {
                line: line_no,
                message: format!("expected {} fields, found {}", schema.columns.len(), fields.len()),
            });
        }
        let mut user = None;
        let mut item = None;
        let mut rating = None;
        let mut timestamp = None;
        for (col, raw) in schema.columns.iter().zip(fields) {
            let raw = raw.trim();
            match col {
                Column::User => user = Some(raw.to_string()),
                Column::Item => item = Some(raw.to_string()),
                Column::Rating => {
                    let r: f64 = raw.parse().map_err(|_| LocaError::MalformedRow {
                        line: line_no,
                        message: format!("rating `{raw}` is not a number"),
                    })?;
                    rating = Some(r);
                }
                Column::Timestamp => {
                    let t = parse_timestamp(raw).ok_or_else(|| LocaError::MalformedRow {
                        line: line_no,
                        message: format!("timestamp `{raw}` is not an integer"),
                    })?;
                    timestamp = Some(t);
                }
                Column::Ignore => {}
            }
        }
        let (user, item) = (user.unwrap_or_default(), item.unwrap_or_default());
        if user.is_empty() || item.is_empty() {
            return Err(LocaError::MalformedRow {
                line: line_no,
                message: "empty user or item token".into(),
            });
        }
        records.push(Interaction {
            user,
            item,
            rating,
            timestamp,
        });
    }
    Ok(InteractionLog { records })
}

fn parse_timestamp(raw: &str) -> Option<i64> {
    raw.parse::<i64>().ok().or_else(|| {
        // accept integral floats such as "978300760.0"
        let f: f64 = raw.parse().ok()?;
        (f.fract() == 0.0 && f.is_finite()).then_some(f as i64)
    })
}

/// Bidirectional map between opaque tokens and dense indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TokenIndex {
    tokens: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl TokenIndex {
    /// Returns the index of `token`, assigning the next free one on first sight.
    pub fn intern(&mut self, token: &str) -> usize {
        if let Some(&idx) = self.lookup.get(token) {
            return idx;
        }
        let idx = self.tokens.len();
        self.tokens.push(token.to_string());
        self.lookup.insert(token.to_string(), idx);
        idx
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.lookup.get(token).copied()
    }

    pub fn token(&self, idx: usize) -> Option<&str> {
        self.tokens.get(idx).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Builds an index from tokens in index order.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut lookup = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if lookup.insert(t.clone(), i).is_some() {
                return Err(LocaError::Config(format!("duplicate token `{t}`")));
            }
        }
        Ok(TokenIndex { tokens, lookup })
    }
}

/// Sparse binary user-by-item matrix. Each row lists the user's positive
/// items in strictly increasing order.
#[derive(Clone, Debug, PartialEq)]
pub struct RatingMatrix {
    n_items: usize,
    rows: Vec<Vec<usize>>,
    pub user_index: TokenIndex,
    pub item_index: TokenIndex,
}

impl RatingMatrix {
    /// Builds a matrix from raw rows, sorting and deduplicating each row.
    /// Empty rows are allowed here; the "every user has a positive" rule is
    /// enforced by [`preprocess`].
    pub fn from_rows(n_items: usize, rows: Vec<Vec<usize>>) -> Result<Self> {
        let m = rows.len();
        let user_index = TokenIndex::from_tokens((0..m).map(|u| u.to_string()).collect())?;
        let item_index = TokenIndex::from_tokens((0..n_items).map(|i| i.to_string()).collect())?;
        Self::with_index(n_items, rows, user_index, item_index)
    }

    pub fn with_index(
        n_items: usize,
        mut rows: Vec<Vec<usize>>,
        user_index: TokenIndex,
        item_index: TokenIndex,
    ) -> Result<Self> {
        if user_index.len() != rows.len() {
            return Err(LocaError::DimensionMismatch {
                expected: rows.len(),
                actual: user_index.len(),
            });
        }
        if item_index.len() != n_items {
            return Err(LocaError::DimensionMismatch {
                expected: n_items,
                actual: item_index.len(),
            });
        }
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
            if let Some(&last) = row.last() {
                if last >= n_items {
                    return Err(LocaError::Domain(format!(
                        "item index {last} out of range for {n_items} items"
                    )));
                }
            }
        }
        Ok(RatingMatrix {
            n_items,
            rows,
            user_index,
            item_index,
        })
    }

    pub fn n_users(&self) -> usize {
        self.rows.len()
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn row(&self, u: usize) -> &[usize] {
        &self.rows[u]
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn contains(&self, u: usize, i: usize) -> bool {
        self.rows[u].binary_search(&i).is_ok()
    }

    /// Dense 0/1 vector for user `u`.
    pub fn dense_row(&self, u: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.n_items];
        for &i in &self.rows[u] {
            v[i] = 1.0;
        }
        v
    }

    /// Keeps only the listed users, in the given order.
    pub fn select_users(&self, users: &[usize]) -> RatingMatrix {
        let rows = users.iter().map(|&u| self.rows[u].clone()).collect();
        let tokens = users
            .iter()
            .map(|&u| self.user_index.token(u).unwrap_or_default().to_string())
            .collect();
        RatingMatrix {
            n_items: self.n_items,
            rows,
            user_index: TokenIndex::from_tokens(tokens).expect("subset of unique tokens"),
            item_index: self.item_index.clone(),
        }
    }
}

/// Rule deciding which raw interactions count as positives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PositiveThreshold {
    /// Every interaction is a positive.
    All,
    /// Only ratings `>=` the threshold are positives; unrated records pass.
    AtLeast(f64),
}

impl PositiveThreshold {
    fn accepts(self, rating: Option<f64>) -> bool {
        match (self, rating) {
            (PositiveThreshold::All, _) | (_, None) => true,
            (PositiveThreshold::AtLeast(t), Some(r)) => r >= t,
        }
    }
}

/// Collapses duplicate (user, item) records keeping the latest one, in
/// first-appearance order of the pair.
fn collapse_duplicates(log: &InteractionLog) -> Vec<&Interaction> {
    let mut slot: HashMap<(&str, &str), usize> = HashMap::new();
    let mut kept: Vec<&Interaction> = Vec::new();
    for rec in &log.records {
        match slot.get(&(rec.user.as_str(), rec.item.as_str())) {
            Some(&idx) => {
                if rec.timestamp.unwrap_or(i64::MIN) >= kept[idx].timestamp.unwrap_or(i64::MIN) {
                    kept[idx] = rec;
                }
            }
            None => {
                slot.insert((rec.user.as_str(), rec.item.as_str()), kept.len());
                kept.push(rec);
            }
        }
    }
    kept
}

/// Binarizes the log and drops users with fewer than `min_user_interactions`
/// surviving positives. Dense indices follow first appearance.
pub fn preprocess(
    log: &InteractionLog,
    min_user_interactions: usize,
    positive_threshold: PositiveThreshold,
) -> Result<RatingMatrix> {
    if min_user_interactions == 0 {
        return Err(LocaError::Config("min_user_interactions must be at least 1".into()));
    }
    let positives: Vec<&Interaction> = collapse_duplicates(log)
        .into_iter()
        .filter(|r| positive_threshold.accepts(r.rating))
        .collect();

    let mut per_user: HashMap<&str, usize> = HashMap::new();
    for r in &positives {
        *per_user.entry(r.user.as_str()).or_default() += 1;
    }

    let mut user_index = TokenIndex::default();
    let mut item_index = TokenIndex::default();
    let mut rows: Vec<Vec<usize>> = Vec::new();
    for r in &positives {
        if per_user[r.user.as_str()] < min_user_interactions {
            continue;
        }
        let u = user_index.intern(&r.user);
        let i = item_index.intern(&r.item);
        if u == rows.len() {
            rows.push(Vec::new());
        }
        rows[u].push(i);
    }
    if rows.is_empty() {
        return Err(LocaError::EmptyDataset(format!(
            "no user has at least {min_user_interactions} positive interactions"
        )));
    }
    let n = item_index.len();
    RatingMatrix::with_index(n, rows, user_index, item_index)
}

/// Train matrix plus the last `k` positives of every user.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitDataset {
    pub train: RatingMatrix,
    /// Held-out items per user in chronological order.
    pub heldout: Vec<Vec<usize>>,
    pub k: usize,
}

impl SplitDataset {
    pub fn n_users(&self) -> usize {
        self.train.n_users()
    }

    pub fn n_items(&self) -> usize {
        self.train.n_items()
    }

    /// Writes `train.csv`, `heldout.csv` and `index_map.csv` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| LocaError::io(dir, e))?;
        let mut train = String::from("user,item\n");
        for (u, row) in self.train.rows().iter().enumerate() {
            for i in row {
                let _ = writeln!(train, "{u},{i}");
            }
        }
        let mut heldout = format!("user,item\n# k={}\n", self.k);
        for (u, row) in self.heldout.iter().enumerate() {
            for i in row {
                let _ = writeln!(heldout, "{u},{i}");
            }
        }
        let mut index = String::from("kind,token,index\n");
        for (u, tok) in self.train.user_index.tokens().iter().enumerate() {
            let _ = writeln!(index, "user,{tok},{u}");
        }
        for (i, tok) in self.train.item_index.tokens().iter().enumerate() {
            let _ = writeln!(index, "item,{tok},{i}");
        }
        for (name, body) in [("train.csv", train), ("heldout.csv", heldout), ("index_map.csv", index)] {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| LocaError::io(&p, e))?;
        }
        Ok(())
    }

    /// Reads a split written by [`SplitDataset::save`].
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let read = |name: &str| {
            let p = dir.join(name);
            fs::read_to_string(&p).map_err(|e| LocaError::io(&p, e))
        };
        let index_text = read("index_map.csv")?;
        let mut users = Vec::new();
        let mut items = Vec::new();
        for (ln, line) in index_text.lines().enumerate().skip(1) {
            let mut parts = line.rsplitn(2, ',');
            let idx = parts.next().and_then(|s| s.parse::<usize>().ok());
            let rest = parts.next();
            let (Some(idx), Some(rest)) = (idx, rest) else {
                return Err(LocaError::MalformedRow {
                    line: ln + 1,
                    message: format!("bad index-map row `{line}`"),
                });
            };
            let (kind, token) = rest.split_once(',').unwrap_or((rest, ""));
            let target = match kind {
                "user" => &mut users,
                "item" => &mut items,
                _ => {
                    return Err(LocaError::MalformedRow {
                        line: ln + 1,
                        message: format!("unknown index kind `{kind}`"),
                    })
                }
            };
            if idx != target.len() {
                return Err(LocaError::artifact(
                    dir.join("index_map.csv"),
                    format!("index {idx} out of order"),
                ));
            }
            target.push(token.to_string());
        }
        let m = users.len();
        let n = items.len();
        let pairs = |name: &str| -> Result<(Vec<Vec<usize>>, Option<usize>)> {
            let text = read(name)?;
            let mut rows = vec![Vec::new(); m];
            let mut k = None;
            for (ln, line) in text.lines().enumerate().skip(1) {
                if let Some(rest) = line.strip_prefix("# k=") {
                    k = rest.trim().parse().ok();
                    continue;
                }
                let parsed = line
                    .split_once(',')
                    .and_then(|(u, i)| Some((u.parse::<usize>().ok()?, i.parse::<usize>().ok()?)));
                match parsed {
                    Some((u, i)) if u < m && i < n => rows[u].push(i),
                    _ => {
                        return Err(LocaError::MalformedRow {
                            line: ln + 1,
                            message: format!("bad row `{line}` in {name}"),
                        })
                    }
                }
            }
            Ok((rows, k))
        };
        let (train_rows, _) = pairs("train.csv")?;
        let (heldout, k) = pairs("heldout.csv")?;
        let k = k.unwrap_or_else(|| heldout.first().map_or(0, Vec::len));
        let train = RatingMatrix::with_index(
            n,
            train_rows,
            TokenIndex::from_tokens(users)?,
            TokenIndex::from_tokens(items)?,
        )?;
        Ok(SplitDataset { train, heldout, k })
    }
}

/// Holds out each user's `k` most recent positives. Timestamp ties at the
/// boundary send the larger item index to the held-out side.
pub fn leave_k_out_split(log: &InteractionLog, matrix: &RatingMatrix, k: usize) -> Result<SplitDataset> {
    let m = matrix.n_users();
    let mut stamps: Vec<HashMap<usize, i64>> = vec![HashMap::new(); m];
    for rec in &log.records {
        let (Some(u), Some(i)) = (matrix.user_index.get(&rec.user), matrix.item_index.get(&rec.item)) else {
            continue;
        };
        if !matrix.contains(u, i) {
            continue;
        }
        let Some(ts) = rec.timestamp else {
            return Err(LocaError::Config("leave-k-out split needs a timestamp column".into()));
        };
        let slot = stamps[u].entry(i).or_insert(ts);
        *slot = (*slot).max(ts);
    }

    let mut train_rows = Vec::with_capacity(m);
    let mut heldout = Vec::with_capacity(m);
    for u in 0..m {
        let row = matrix.row(u);
        if k > 0 && row.len() <= k {
            return Err(LocaError::Config(format!(
                "user `{}` has {} interactions, needs more than k={k}",
                matrix.user_index.token(u).unwrap_or("?"),
                row.len()
            )));
        }
        let mut timed: Vec<(i64, usize)> = row
            .iter()
            .map(|&i| {
                stamps[u].get(&i).map(|&ts| (ts, i)).ok_or_else(|| {
                    LocaError::Config(format!(
                        "no timestamp for user `{}` item `{}`",
                        matrix.user_index.token(u).unwrap_or("?"),
                        matrix.item_index.token(i).unwrap_or("?")
                    ))
                })
            })
            .collect::<Result<_>>()?;
        timed.sort_unstable();
        let cut = timed.len() - k;
        train_rows.push(timed[..cut].iter().map(|&(_, i)| i).collect());
        heldout.push(timed[cut..].iter().map(|&(_, i)| i).collect());
    }
    let train = RatingMatrix::with_index(
        matrix.n_items(),
        train_rows,
        matrix.user_index.clone(),
        matrix.item_index.clone(),
    )?;
    Ok(SplitDataset { train, heldout, k })
}
