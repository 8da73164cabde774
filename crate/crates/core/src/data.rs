//! Choice observations: raw survey tables, the Swissmetro filtering and
//! feature derivation, and seeded train/dev/test splitting.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::category::CategoryMap;
use crate::error::{Error, Result};

/// Parsed tabular file: named columns, numeric cells.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl RawTable {
    pub fn new(columns: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].contains(c) {
                return Err(Error::DuplicateColumn(c.clone()));
            }
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(Error::RaggedRow {
                    row: r,
                    expected: columns.len(),
                    found: row.len(),
                });
            }
        }
        Ok(Self { columns, rows })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::MissingColumn(name.to_owned()))
    }
}

/// Codes of one categorical variable against a shared [`CategoryMap`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalColumn {
    pub map: CategoryMap,
    pub codes: Vec<usize>,
}

impl CategoricalColumn {
    pub fn label_of(&self, n: usize) -> &str {
        self.map.label(self.codes[n])
    }

    /// Observation counts per category index.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = alloc::vec![0; self.map.len()];
        for &c in &self.codes {
            counts[c] += 1;
        }
        counts
    }
}

/// Filtered observations ready for encoding and estimation.
///
/// Storage is columnar: every feature and categorical variable holds one entry
/// per observation, and availability is a row-major `N x C` flag array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceDataset {
    alternatives: Vec<String>,
    features: BTreeMap<String, Vec<f64>>,
    categorical: BTreeMap<String, CategoricalColumn>,
    choices: Vec<usize>,
    availability: Vec<bool>,
    observation_ids: Vec<u64>,
    respondent_ids: Vec<u64>,
}

impl ChoiceDataset {
    pub fn new(
        alternatives: Vec<String>,
        features: BTreeMap<String, Vec<f64>>,
        categorical: BTreeMap<String, CategoricalColumn>,
        choices: Vec<usize>,
        availability: Vec<bool>,
        observation_ids: Vec<u64>,
        respondent_ids: Vec<u64>,
    ) -> Result<Self> {
        let n = choices.len();
        let c = alternatives.len();
        if availability.len() != n * c {
            return Err(Error::Shape(format!(
                "availability has {} flags for {n} observations x {c} alternatives",
                availability.len()
            )));
        }
        if observation_ids.len() != n || respondent_ids.len() != n {
            return Err(Error::Shape("id columns do not match observation count".into()));
        }
        for (name, v) in &features {
            if v.len() != n {
                return Err(Error::Shape(format!("feature `{name}` has {} values", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(format!("feature `{name}` is not finite")));
            }
        }
        for (name, col) in &categorical {
            if col.codes.len() != n {
                return Err(Error::Shape(format!("variable `{name}` has {} codes", col.codes.len())));
            }
            if col.codes.iter().any(|&k| k >= col.map.len()) {
                return Err(Error::InvalidArgument(format!("variable `{name}` has out-of-range codes")));
            }
        }
        for (i, &y) in choices.iter().enumerate() {
            if y >= c || !availability[i * c + y] {
                return Err(Error::InvalidArgument(format!(
                    "observation {i} chose an unavailable alternative"
                )));
            }
        }
        Ok(Self {
            alternatives,
            features,
            categorical,
            choices,
            availability,
            observation_ids,
            respondent_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.choices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }

    pub fn alternatives(&self) -> &[String] {
        &self.alternatives
    }

    pub fn n_alternatives(&self) -> usize {
        self.alternatives.len()
    }

    pub fn choices(&self) -> &[usize] {
        &self.choices
    }

    pub fn availability(&self) -> &[bool] {
        &self.availability
    }

    pub fn available(&self, n: usize) -> &[bool] {
        let c = self.alternatives.len();
        &self.availability[n * c..(n + 1) * c]
    }

    pub fn observation_ids(&self) -> &[u64] {
        &self.observation_ids
    }

    pub fn respondent_ids(&self) -> &[u64] {
        &self.respondent_ids
    }

    pub fn features(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.features
    }

    pub fn feature(&self, name: &str) -> Result<&[f64]> {
        self.features
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownFeature(name.to_owned()))
    }

    pub fn categorical_variables(&self) -> &BTreeMap<String, CategoricalColumn> {
        &self.categorical
    }

    pub fn categorical(&self, variable: &str) -> Result<&CategoricalColumn> {
        self.categorical
            .get(variable)
            .ok_or_else(|| Error::UnknownVariable(variable.to_owned()))
    }

    /// Rows at `indices`, in that order. Category maps are shared unchanged.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let c = self.alternatives.len();
        let pick = |v: &Vec<f64>| indices.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Self {
            alternatives: self.alternatives.clone(),
            features: self.features.iter().map(|(k, v)| (k.clone(), pick(v))).collect(),
            categorical: self
                .categorical
                .iter()
                .map(|(k, col)| {
                    (
                        k.clone(),
                        CategoricalColumn {
                            map: col.map.clone(),
                            codes: indices.iter().map(|&i| col.codes[i]).collect(),
                        },
                    )
                })
                .collect(),
            choices: indices.iter().map(|&i| self.choices[i]).collect(),
            availability: indices
                .iter()
                .flat_map(|&i| self.availability[i * c..(i + 1) * c].iter().copied())
                .collect(),
            observation_ids: indices.iter().map(|&i| self.observation_ids[i]).collect(),
            respondent_ids: indices.iter().map(|&i| self.respondent_ids[i]).collect(),
        }
    }

    /// Keeps only the listed features and categorical variables.
    pub fn restrict(&self, features: &[&str], variables: &[&str]) -> Result<Self> {
        let mut out = self.clone();
        for f in features {
            self.feature(f)?;
        }
        for v in variables {
            self.categorical(v)?;
        }
        out.features.retain(|k, _| features.contains(&k.as_str()));
        out.categorical.retain(|k, _| variables.contains(&k.as_str()));
        Ok(out)
    }
}

/// Alternative labels for the Swissmetro mode choice, in choice-code order.
pub const SWISSMETRO_ALTERNATIVES: [&str; 3] = ["Train", "SM", "Car"];

/// Names of the derived numeric features.
pub mod feature {
    pub const TRAIN_TT: &str = "train_tt";
    pub const SM_TT: &str = "sm_tt";
    pub const CAR_TT: &str = "car_tt";
    pub const TRAIN_COST: &str = "train_cost";
    pub const SM_COST: &str = "sm_cost";
    pub const CAR_COST: &str = "car_cost";
    pub const TRAIN_HEADWAY: &str = "train_headway";
    pub const SM_HEADWAY: &str = "sm_headway";
    pub const SM_SEATS: &str = "sm_seats";
    pub const TRAIN_SURVEY: &str = "train_survey";
    pub const REGULAR_CLASS: &str = "regular_class";
    pub const LUGGAGE_ONE: &str = "luggage_one";
    pub const LUGGAGE_MANY: &str = "luggage_many";

    /// Every derived feature with its definition over the raw columns.
    pub const DEFINITIONS: [(&str, &str); 13] = [
        (TRAIN_TT, "TRAIN_TT / 60 (hours)"),
        (SM_TT, "SM_TT / 60 (hours)"),
        (CAR_TT, "CAR_TT / 60 (hours)"),
        (TRAIN_COST, "TRAIN_CO * (GA == 0) / 100"),
        (SM_COST, "SM_CO * (GA == 0) / 100"),
        (CAR_COST, "CAR_CO / 100"),
        (TRAIN_HEADWAY, "TRAIN_HE / 60 (hours)"),
        (SM_HEADWAY, "SM_HE / 60 (hours)"),
        (SM_SEATS, "SM_SEATS (airline seat configuration)"),
        (TRAIN_SURVEY, "SURVEY == 0 (surveyed on a train)"),
        (REGULAR_CLASS, "FIRST == 0"),
        (LUGGAGE_ONE, "LUGGAGE == 1"),
        (LUGGAGE_MANY, "LUGGAGE > 1"),
    ];
}

/// Categorical variables of the encoding set.
pub mod variable {
    pub const OD: &str = "OD";
    pub const TICKET: &str = "TICKET";
    pub const WHO: &str = "WHO";
    pub const AGE: &str = "AGE";
    pub const INCOME: &str = "INCOME";
}

/// Row filters applied before feature derivation.
///
/// Rows with an out-of-range CHOICE code or whose chosen alternative is
/// unavailable are always removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterRules {
    /// AGE classes to drop (class 6 is "not known").
    pub drop_age_classes: Vec<i64>,
    /// PURPOSE codes to drop.
    pub drop_purposes: Vec<i64>,
    /// Merge INCOME code 0 into code 1 (both mean "under 50").
    pub merge_income_zero: bool,
}

impl Default for FilterRules {
    fn default() -> Self {
        Self {
            drop_age_classes: alloc::vec![6],
            drop_purposes: alloc::vec![9],
            merge_income_zero: true,
        }
    }
}

const REQUIRED_COLUMNS: [&str; 25] = [
    "ID", "PURPOSE", "FIRST", "TICKET", "WHO", "LUGGAGE", "AGE", "INCOME", "GA", "ORIGIN", "DEST",
    "TRAIN_AV", "CAR_AV", "SM_AV", "TRAIN_TT", "TRAIN_CO", "TRAIN_HE", "SM_TT", "SM_CO", "SM_HE",
    "SM_SEATS", "CAR_TT", "CAR_CO", "SURVEY", "CHOICE",
];

fn ticket_label(code: i64) -> String {
    match code {
        0 => "None",
        1 => "2 way w 1/2 price",
        2 => "1 way w 1/2 price",
        3 => "2 way normal price",
        4 => "1 way normal price",
        5 => "Half day",
        6 => "Annual ticket",
        7 => "Annual ticket Junior or Senior",
        8 => "Free travel after 7pm",
        9 => "Group ticket",
        10 => "Other",
        other => return other.to_string(),
    }
    .to_owned()
}

fn who_label(code: i64) -> String {
    match code {
        0 => "unknown",
        1 => "self",
        2 => "employer",
        3 => "half-half",
        other => return other.to_string(),
    }
    .to_owned()
}

fn age_label(code: i64) -> String {
    match code {
        1 => "age<=24",
        2 => "24<age<=39",
        3 => "39<age<=54",
        4 => "54<age<=65",
        5 => "65<age",
        6 => "not known",
        other => return other.to_string(),
    }
    .to_owned()
}

fn income_label(code: i64, merge_zero: bool) -> String {
    match code {
        0 if merge_zero => "under 50",
        0 => "under 50 (0)",
        1 => "under 50",
        2 => "50 to 100",
        3 => "over 100",
        4 => "unknown",
        other => return other.to_string(),
    }
    .to_owned()
}

/// Applies `rules` to a Swissmetro-schema table and derives the model
/// features, alternative availability, and categorical variables.
///
/// Category maps are built from the rows that survive filtering, so every
/// later split shares one index per variable.
pub fn filter_and_derive(raw: &RawTable, rules: &FilterRules) -> Result<ChoiceDataset> {
    let mut idx = BTreeMap::new();
    for name in REQUIRED_COLUMNS {
        idx.insert(name, raw.column_index(name)?);
    }
    let get = |row: &[f64], name: &str| row[idx[name]];
    let code = |row: &[f64], name: &str| libm::round(row[idx[name]]) as i64;

    let mut features: BTreeMap<String, Vec<f64>> = feature::DEFINITIONS
        .iter()
        .map(|(n, _)| ((*n).to_owned(), Vec::new()))
        .collect();
    let mut labels: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    let mut choices = Vec::new();
    let mut availability = Vec::new();
    let mut observation_ids = Vec::new();
    let mut respondent_ids = Vec::new();

    for (r, row) in raw.rows().iter().enumerate() {
        let choice = code(row, "CHOICE");
        if !(1..=3).contains(&choice) {
            continue;
        }
        let avail = [
            get(row, "TRAIN_AV") != 0.0,
            get(row, "SM_AV") != 0.0,
            get(row, "CAR_AV") != 0.0,
        ];
        let chosen = (choice - 1) as usize;
        if !avail[chosen] {
            continue;
        }
        if rules.drop_age_classes.contains(&code(row, "AGE"))
            || rules.drop_purposes.contains(&code(row, "PURPOSE"))
        {
            continue;
        }
        let no_ga = if get(row, "GA") == 0.0 { 1.0 } else { 0.0 };
        let luggage = code(row, "LUGGAGE");
        let derived = [
            (feature::TRAIN_TT, get(row, "TRAIN_TT") / 60.0),
            (feature::SM_TT, get(row, "SM_TT") / 60.0),
            (feature::CAR_TT, get(row, "CAR_TT") / 60.0),
            (feature::TRAIN_COST, get(row, "TRAIN_CO") * no_ga / 100.0),
            (feature::SM_COST, get(row, "SM_CO") * no_ga / 100.0),
            (feature::CAR_COST, get(row, "CAR_CO") / 100.0),
            (feature::TRAIN_HEADWAY, get(row, "TRAIN_HE") / 60.0),
            (feature::SM_HEADWAY, get(row, "SM_HE") / 60.0),
            (feature::SM_SEATS, get(row, "SM_SEATS")),
            (feature::TRAIN_SURVEY, f64::from(u8::from(get(row, "SURVEY") == 0.0))),
            (feature::REGULAR_CLASS, f64::from(u8::from(get(row, "FIRST") == 0.0))),
            (feature::LUGGAGE_ONE, f64::from(u8::from(luggage == 1))),
            (feature::LUGGAGE_MANY, f64::from(u8::from(luggage > 1))),
        ];
        if derived.iter().any(|(_, v)| !v.is_finite()) {
            log::warn!("row {r}: non-finite derived feature, dropped");
            continue;
        }
        for (name, v) in derived {
            features.get_mut(name).expect("declared feature").push(v);
        }
        let cats = [
            (
                variable::OD,
                format!("{}_{}", code(row, "ORIGIN"), code(row, "DEST")),
            ),
            (variable::TICKET, ticket_label(code(row, "TICKET"))),
            (variable::WHO, who_label(code(row, "WHO"))),
            (variable::AGE, age_label(code(row, "AGE"))),
            (
                variable::INCOME,
                income_label(code(row, "INCOME"), rules.merge_income_zero),
            ),
        ];
        for (name, label) in cats {
            labels.entry(name).or_default().push(label);
        }
        choices.push(chosen);
        availability.extend_from_slice(&avail);
        observation_ids.push(r as u64);
        respondent_ids.push(get(row, "ID") as u64);
    }
    if choices.is_empty() {
        return Err(Error::EmptyAfterFilter);
    }

    let categorical = labels
        .into_iter()
        .map(|(name, values)| {
            let map = CategoryMap::from_labels(name, values.iter().cloned());
            let codes = values
                .iter()
                .map(|l| map.index_of(l).expect("label taken from the same list"))
                .collect();
            (name.to_owned(), CategoricalColumn { map, codes })
        })
        .collect();

    ChoiceDataset::new(
        SWISSMETRO_ALTERNATIVES.iter().map(|s| (*s).to_owned()).collect(),
        features,
        categorical,
        choices,
        availability,
        observation_ids,
        respondent_ids,
    )
}

/// Train/dev/test proportions and the shuffling seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub ratios: [f64; 3],
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            ratios: [0.6, 0.2, 0.2],
            seed: 42,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.ratios.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
            return Err(Error::InvalidSplit(format!(
                "every ratio must lie in (0, 1), got {:?}",
                self.ratios
            )));
        }
        let total: f64 = self.ratios.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSplit(format!("ratios sum to {total}, not 1")));
        }
        Ok(())
    }
}

/// Row indices of each partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub dev: Vec<usize>,
    pub test: Vec<usize>,
}

/// `0..n` in the order of a ChaCha8 shuffle seeded with `seed`.
pub fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

/// Shuffles `0..n` with a ChaCha8 generator seeded from `spec.seed` and cuts
/// it into `round(r_train n)`, `round(r_dev n)` and the remainder.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<SplitIndices> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidSplit("cannot split an empty dataset".into()));
    }
    let mut order = shuffled(n, spec.seed);
    let n_train = (libm::round(spec.ratios[0] * n as f64) as usize).min(n);
    let n_dev = (libm::round(spec.ratios[1] * n as f64) as usize).min(n - n_train);
    let test = order.split_off(n_train + n_dev);
    let dev = order.split_off(n_train);
    Ok(SplitIndices {
        train: order,
        dev,
        test,
    })
}

#[derive(Debug, Clone)]
pub struct DataSplit {
    pub train: ChoiceDataset,
    pub dev: ChoiceDataset,
    pub test: ChoiceDataset,
    pub indices: SplitIndices,
}

pub fn split(data: &ChoiceDataset, spec: &SplitSpec) -> Result<DataSplit> {
    let indices = split_indices(data.len(), spec)?;
    Ok(DataSplit {
        train: data.subset(&indices.train),
        dev: data.subset(&indices.dev),
        test: data.subset(&indices.test),
        indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn swissmetro_row(overrides: &[(&str, f64)]) -> (Vec<String>, Vec<f64>) {
        let mut cols: Vec<String> = REQUIRED_COLUMNS.iter().map(|s| (*s).to_owned()).collect();
        cols.push("MALE".into());
        let mut row: Vec<f64> = cols
            .iter()
            .map(|c| match c.as_str() {
                "ID" => 7.0,
                "PURPOSE" => 1.0,
                "TICKET" => 1.0,
                "WHO" => 1.0,
                "AGE" => 3.0,
                "INCOME" => 2.0,
                "ORIGIN" => 1.0,
                "DEST" => 2.0,
                "TRAIN_AV" | "SM_AV" | "CAR_AV" => 1.0,
                "TRAIN_TT" => 120.0,
                "TRAIN_CO" => 50.0,
                "CHOICE" => 2.0,
                _ => 0.0,
            })
            .collect();
        for (name, v) in overrides {
            let i = cols.iter().position(|c| c == name).unwrap();
            row[i] = *v;
        }
        (cols, row)
    }

    fn table(rows: &[&[(&str, f64)]]) -> RawTable {
        let cols = swissmetro_row(&[]).0;
        RawTable::new(cols, rows.iter().map(|o| swissmetro_row(o).1).collect()).unwrap()
    }

    #[test]
    fn raw_table_validates() {
        assert!(RawTable::new(vec!["A".into(), "A".into()], vec![]).is_err());
        assert!(RawTable::new(vec!["A".into(), "B".into()], vec![vec![1.0]]).is_err());
        let t = RawTable::new(vec!["A".into(), "B".into()], vec![vec![1.0, 2.0]]).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.column_index("B").unwrap(), 1);
    }

    #[test]
    fn derives_units_and_labels() {
        let t = table(&[&[], &[("ORIGIN", 2.0), ("DEST", 1.0), ("GA", 1.0)]]);
        let d = filter_and_derive(&t, &FilterRules::default()).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.feature(feature::TRAIN_TT).unwrap()[0], 2.0);
        assert_eq!(d.feature(feature::TRAIN_COST).unwrap(), &[0.5, 0.0]);
        assert_eq!(d.feature(feature::TRAIN_SURVEY).unwrap()[0], 1.0);
        let od = d.categorical(variable::OD).unwrap();
        assert_eq!(od.label_of(0), "1_2");
        assert_eq!(od.label_of(1), "2_1");
        assert_eq!(d.choices(), &[1, 1]);
    }

    #[test]
    fn applies_filters() {
        let t = table(&[
            &[("CHOICE", 0.0)],
            &[("CHOICE", 3.0), ("CAR_AV", 0.0)],
            &[("AGE", 6.0)],
            &[("PURPOSE", 9.0)],
            &[("INCOME", 0.0)],
            &[("INCOME", 1.0)],
        ]);
        let d = filter_and_derive(&t, &FilterRules::default()).unwrap();
        assert_eq!(d.len(), 2);
        let income = d.categorical(variable::INCOME).unwrap();
        assert_eq!(income.map.len(), 1);
        assert_eq!(income.label_of(0), "under 50");
        assert_eq!(d.observation_ids(), &[4, 5]);
    }

    #[test]
    fn everything_filtered_is_an_error() {
        let t = table(&[&[("CHOICE", 0.0)]]);
        assert_eq!(
            filter_and_derive(&t, &FilterRules::default()),
            Err(Error::EmptyAfterFilter)
        );
    }

    #[test]
    fn missing_schema_column() {
        let t = RawTable::new(vec!["CHOICE".into()], vec![vec![1.0]]).unwrap();
        assert!(matches!(
            filter_and_derive(&t, &FilterRules::default()),
            Err(Error::MissingColumn(_))
        ));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let spec = SplitSpec {
            ratios: [0.6, 0.2, 0.2],
            seed: 7,
        };
        let a = split_indices(10, &spec).unwrap();
        assert_eq!((a.train.len(), a.dev.len(), a.test.len()), (6, 2, 2));
        assert_eq!(a, split_indices(10, &spec).unwrap());
        let mut all: Vec<usize> = a.train.iter().chain(&a.dev).chain(&a.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn split_spec_validation() {
        let bad = SplitSpec {
            ratios: [0.6, 0.3, 0.2],
            seed: 0,
        };
        assert!(split_indices(10, &bad).is_err());
        let zero = SplitSpec {
            ratios: [1.0, 0.0, 0.0],
            seed: 0,
        };
        assert!(zero.validate().is_err());
    }
}
