//! Data model: feature tables, masks, phenotype and scan-parameter records.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

/// Binary diagnosis. `Nt` encodes as 0, `Asd` as 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Nt = 0,
    Asd = 1,
}

impl Label {
    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    #[inline]
    pub fn from_index(i: usize) -> Label {
        if i == 0 {
            Label::Nt
        } else {
            Label::Asd
        }
    }

    pub fn flip(self) -> Label {
        match self {
            Label::Nt => Label::Asd,
            Label::Asd => Label::Nt,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Nt => "NT",
            Label::Asd => "ASD",
        }
    }

    /// Parses the file encoding (`ASD` / `NT`, case-insensitive).
    pub fn parse(s: &str) -> Option<Label> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("ASD") {
            Some(Label::Asd)
        } else if s.eq_ignore_ascii_case("NT") {
            Some(Label::Nt)
        } else {
            None
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: alloc::vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn select_cols(&self, cols: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for r in 0..self.rows {
            let row = self.row(r);
            data.extend(cols.iter().map(|&c| row[c]));
        }
        Matrix {
            rows: self.rows,
            cols: cols.len(),
            data,
        }
    }

    /// First non-finite cell, if any.
    pub fn find_non_finite(&self) -> Option<(usize, usize)> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|i| (i / self.cols, i % self.cols))
    }
}

/// Binary feature-selection mask over `d` columns.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mask(Vec<bool>);

impl Mask {
    pub fn new(bits: Vec<bool>) -> Self {
        Mask(bits)
    }

    pub fn ones(d: usize) -> Self {
        Mask(alloc::vec![true; d])
    }

    pub fn zeros(d: usize) -> Self {
        Mask(alloc::vec![false; d])
    }

    /// Mask with exactly the given indices set.
    pub fn from_indices(d: usize, idx: &[usize]) -> Self {
        let mut m = Self::zeros(d);
        for &i in idx {
            m.0[i] = true;
        }
        m
    }

    /// Bits of a `u64`, least significant bit first.
    pub fn from_u64(d: usize, word: u64) -> Self {
        Mask((0..d).map(|i| (word >> i) & 1 == 1).collect())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        self.0[i] = v;
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = !self.0[i];
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn is_all_zero(&self) -> bool {
        !self.0.iter().any(|&b| b)
    }

    pub fn indices(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    /// Bitwise AND. Lengths must agree.
    pub fn and(&self, other: &Mask) -> Result<Mask> {
        self.check_len(other.len())?;
        Ok(Mask(
            self.0.iter().zip(&other.0).map(|(&a, &b)| a && b).collect(),
        ))
    }

    /// True when every set bit of `self` is also set in `outer`.
    pub fn is_subset_of(&self, outer: &Mask) -> bool {
        self.len() == outer.len() && self.0.iter().zip(&outer.0).all(|(&a, &b)| !a || b)
    }

    /// Expresses `self` in the coordinates of the columns kept by `outer`:
    /// the result has `outer.count_ones()` bits, taken from `self` at the
    /// set positions of `outer`.
    pub fn restrict(&self, outer: &Mask) -> Result<Mask> {
        self.check_len(outer.len())?;
        Ok(Mask(
            outer.indices().into_iter().map(|i| self.0[i]).collect(),
        ))
    }

    /// Inverse of [`restrict`](Self::restrict): maps a sub-mask over the
    /// columns kept by `outer` back to `outer`'s indexing.
    pub fn lift(&self, outer: &Mask) -> Result<Mask> {
        let kept = outer.indices();
        if kept.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: kept.len(),
                actual: self.len(),
            });
        }
        let mut out = Mask::zeros(outer.len());
        for (j, &i) in kept.iter().enumerate() {
            out.0[i] = self.0[j];
        }
        Ok(out)
    }

    /// Parses a `0`/`1` string.
    pub fn parse(s: &str) -> Result<Mask> {
        s.trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidRecord(format!(
                    "mask character {other:?} is not 0 or 1"
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Mask)
    }

    /// 64-bit fingerprint of the bit pattern (length-aware).
    pub fn fingerprint(&self) -> u64 {
        let mut words = Vec::with_capacity(self.len() / 64 + 2);
        words.push(self.len() as u64);
        for chunk in self.0.chunks(64) {
            let w = chunk
                .iter()
                .enumerate()
                .fold(0u64, |w, (i, &b)| w | ((b as u64) << i));
            words.push(w);
        }
        crate::rng::derive(0x6d61_736b, &words)
    }

    fn check_len(&self, other: usize) -> Result<()> {
        if self.len() != other {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: other,
            });
        }
        Ok(())
    }
}

impl fmt::Display for Mask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Subjects × features with diagnosis labels and site membership.
///
/// Validated on construction and immutable afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    subject_ids: Vec<String>,
    site_ids: Vec<String>,
    features: Matrix,
    labels: Vec<Label>,
    feature_names: Vec<String>,
}

impl FeatureTable {
    pub fn new(
        subject_ids: Vec<String>,
        site_ids: Vec<String>,
        features: Matrix,
        labels: Vec<Label>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = subject_ids.len();
        if n == 0 {
            return Err(Error::InvalidTable("table has no rows".into()));
        }
        if features.cols() == 0 {
            return Err(Error::InvalidTable("table has no feature columns".into()));
        }
        for (what, len) in [
            ("site_ids", site_ids.len()),
            ("labels", labels.len()),
            ("feature rows", features.rows()),
        ] {
            if len != n {
                return Err(Error::InvalidTable(format!(
                    "{what} has length {len}, expected {n}"
                )));
            }
        }
        if feature_names.len() != features.cols() {
            return Err(Error::InvalidTable(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                features.cols()
            )));
        }
        if let Some((row, col)) = features.find_non_finite() {
            return Err(Error::NonFinite { row, col });
        }
        let mut seen = BTreeSet::new();
        for (row, id) in subject_ids.iter().enumerate() {
            if !seen.insert(id.as_str()) {
                return Err(Error::InvalidTable(format!(
                    "duplicate subject id {id:?} at row {row}"
                )));
            }
        }
        Ok(Self {
            subject_ids,
            site_ids,
            features,
            labels,
            feature_names,
        })
    }

    /// Table with generated ids (`s0`, `s1`, ...), one site and names
    /// `f_1..f_d`. Convenient for in-memory experiments.
    pub fn from_matrix(features: Matrix, labels: Vec<Label>) -> Result<Self> {
        let n = features.rows();
        let d = features.cols();
        Self::new(
            (0..n).map(|i| format!("s{i}")).collect(),
            alloc::vec!["site".to_string(); n],
            features,
            labels,
            (1..=d).map(|j| format!("f_{j}")).collect(),
        )
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.features.cols()
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    pub fn site_ids(&self) -> &[String] {
        &self.site_ids
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Rows at `idx`, in the given order. Indices must be distinct.
    pub fn select_rows(&self, idx: &[usize]) -> FeatureTable {
        FeatureTable {
            subject_ids: idx.iter().map(|&i| self.subject_ids[i].clone()).collect(),
            site_ids: idx.iter().map(|&i| self.site_ids[i].clone()).collect(),
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Keeps the columns whose mask bit is set, in original order.
    pub fn apply_mask(&self, mask: &Mask) -> Result<FeatureTable> {
        if mask.len() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                actual: mask.len(),
            });
        }
        if mask.is_all_zero() {
            return Err(Error::EmptyMask);
        }
        let cols = mask.indices();
        Ok(FeatureTable {
            subject_ids: self.subject_ids.clone(),
            site_ids: self.site_ids.clone(),
            features: self.features.select_cols(&cols),
            labels: self.labels.clone(),
            feature_names: cols
                .iter()
                .map(|&c| self.feature_names[c].clone())
                .collect(),
        })
    }

    /// Splits rows by site, sites ordered by first appearance and rows kept
    /// in their original relative order.
    pub fn partition_by_site(&self) -> Vec<(String, FeatureTable)> {
        let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
        for (i, site) in self.site_ids.iter().enumerate() {
            match groups.iter_mut().find(|(s, _)| s == site) {
                Some((_, rows)) => rows.push(i),
                None => groups.push((site.clone(), alloc::vec![i])),
            }
        }
        groups
            .into_iter()
            .map(|(site, rows)| {
                let t = self.select_rows(&rows);
                (site, t)
            })
            .collect()
    }

    pub fn count_label(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sex {
    Female,
    Male,
}

impl Sex {
    pub fn as_str(self) -> &'static str {
        match self {
            Sex::Female => "F",
            Sex::Male => "M",
        }
    }

    /// Accepts `F`/`M`, `female`/`male`, or the ABIDE codes `2`/`1`.
    pub fn parse(s: &str) -> Option<Sex> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("F") || s.eq_ignore_ascii_case("female") || s == "2" {
            Some(Sex::Female)
        } else if s.eq_ignore_ascii_case("M") || s.eq_ignore_ascii_case("male") || s == "1" {
            Some(Sex::Male)
        } else {
            None
        }
    }
}

/// Eye status during the resting scan: 1 = open, 2 = closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EyeStatus {
    Open = 1,
    Closed = 2,
}

impl EyeStatus {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: i64) -> Option<EyeStatus> {
        match code {
            1 => Some(EyeStatus::Open),
            2 => Some(EyeStatus::Closed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhenotypeRecord {
    pub subject_id: String,
    pub age_at_scan: f64,
    pub sex: Sex,
    pub eye_status: EyeStatus,
}

impl PhenotypeRecord {
    pub fn new(
        subject_id: String,
        age_at_scan: f64,
        sex: Sex,
        eye_status: EyeStatus,
    ) -> Result<Self> {
        if !(age_at_scan.is_finite() && age_at_scan > 0.0) {
            return Err(Error::InvalidRecord(format!(
                "subject {subject_id}: age_at_scan must be positive, got {age_at_scan}"
            )));
        }
        Ok(Self {
            subject_id,
            age_at_scan,
            sex,
            eye_status,
        })
    }
}

/// Acquisition parameters of one site. Missing values are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanParamsRecord {
    pub site_id: String,
    pub vendor: String,
    pub tr_sec: Option<f64>,
    pub te_sec: Option<f64>,
    pub ti_sec: Option<f64>,
    pub fa_deg: Option<f64>,
}

impl ScanParamsRecord {
    pub fn new(
        site_id: String,
        vendor: String,
        tr_sec: Option<f64>,
        te_sec: Option<f64>,
        ti_sec: Option<f64>,
        fa_deg: Option<f64>,
    ) -> Result<Self> {
        for (name, v) in [
            ("TR", tr_sec),
            ("TE", te_sec),
            ("TI", ti_sec),
            ("FA", fa_deg),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::InvalidRecord(format!(
                        "site {site_id}: {name} must be positive, got {v}"
                    )));
                }
            }
        }
        Ok(Self {
            site_id,
            vendor,
            tr_sec,
            te_sec,
            ti_sec,
            fa_deg,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn table(sites: &[&str], d: usize) -> FeatureTable {
        let n = sites.len();
        let data = (0..n * d).map(|v| v as f64).collect();
        FeatureTable::new(
            (0..n).map(|i| format!("sub{i}")).collect(),
            sites.iter().map(|s| s.to_string()).collect(),
            Matrix::new(n, d, data).unwrap(),
            (0..n).map(|i| Label::from_index(i % 2)).collect(),
            (0..d).map(|j| format!("c{j}")).collect(),
        )
        .unwrap()
    }

    #[test]
    fn partition_keeps_order_and_first_appearance() {
        let t = table(&["A", "B", "A"], 2);
        let parts = t.partition_by_site();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].0, "A");
        assert_eq!(parts[0].1.subject_ids(), &["sub0", "sub2"]);
        assert_eq!(parts[1].0, "B");
        assert_eq!(parts[1].1.subject_ids(), &["sub1"]);
    }

    #[test]
    fn single_site_partition_is_identity() {
        let t = table(&["X", "X", "X", "X"], 3);
        let parts = t.partition_by_site();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].1, t);
    }

    #[test]
    fn mask_selects_columns() {
        let t = table(&["A", "A"], 4);
        let m = Mask::new(vec![true, false, false, true]);
        let s = t.apply_mask(&m).unwrap();
        assert_eq!(s.d(), 2);
        assert_eq!(s.feature_names(), &["c0", "c3"]);
        assert_eq!(s.features().row(1), &[4.0, 7.0]);
        assert_eq!(t.apply_mask(&Mask::ones(4)).unwrap(), t);
    }

    #[test]
    fn mask_errors() {
        let t = table(&["A"], 3);
        assert_eq!(t.apply_mask(&Mask::zeros(3)), Err(Error::EmptyMask));
        assert!(matches!(
            t.apply_mask(&Mask::ones(2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rejects_duplicates_and_non_finite() {
        let e = FeatureTable::new(
            vec!["a".into(), "a".into()],
            vec!["s".into(), "s".into()],
            Matrix::new(2, 1, vec![0.0, 1.0]).unwrap(),
            vec![Label::Nt, Label::Asd],
            vec!["f".into()],
        );
        assert!(matches!(e, Err(Error::InvalidTable(_))));
        let e = FeatureTable::new(
            vec!["a".into(), "b".into()],
            vec!["s".into(), "s".into()],
            Matrix::new(2, 1, vec![0.0, f64::NAN]).unwrap(),
            vec![Label::Nt, Label::Asd],
            vec!["f".into()],
        );
        assert_eq!(e, Err(Error::NonFinite { row: 1, col: 0 }));
    }

    #[test]
    fn lift_inverts_restrict() {
        let outer = Mask::new(vec![true, false, true, true, false]);
        let inner = Mask::new(vec![false, true, true]);
        let lifted = inner.lift(&outer).unwrap();
        assert_eq!(lifted.to_string(), "00110");
        assert_eq!(lifted.restrict(&outer).unwrap(), inner);
        assert!(lifted.is_subset_of(&outer));
    }

    #[test]
    fn record_validation() {
        assert!(PhenotypeRecord::new("x".into(), 0.0, Sex::Male, EyeStatus::Open).is_err());
        assert!(EyeStatus::from_code(3).is_none());
        assert!(
            ScanParamsRecord::new("s".into(), "v".into(), Some(-1.0), None, None, None).is_err()
        );
        let r = ScanParamsRecord::new(
            "s".into(),
            "v".into(),
            Some(9e-3),
            Some(3.5e-3),
            None,
            Some(7.0),
        )
        .unwrap();
        assert_eq!(r.ti_sec, None);
    }

    proptest! {
        #[test]
        fn mask_composition(d in 1usize..12, w1 in any::<u64>(), w2 in any::<u64>()) {
            let t = table(&["A", "B", "A"], d);
            let m1 = Mask::from_u64(d, w1);
            let m2 = Mask::from_u64(d, w2);
            let both = m1.and(&m2).unwrap();
            prop_assume!(!m1.is_all_zero() && !both.is_all_zero());
            let stepwise = t
                .apply_mask(&m1).unwrap()
                .apply_mask(&m2.restrict(&m1).unwrap()).unwrap();
            prop_assert_eq!(stepwise, t.apply_mask(&both).unwrap());
        }

        #[test]
        fn partition_conserves_rows(sites in proptest::collection::vec(0u8..5, 1..40)) {
            let names: Vec<String> = sites.iter().map(|s| format!("S{s}")).collect();
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            let t = table(&refs, 2);
            let parts = t.partition_by_site();
            let total: usize = parts.iter().map(|(_, p)| p.n()).sum();
            prop_assert_eq!(total, t.n());
            for (site, p) in &parts {
                prop_assert!(p.site_ids().iter().all(|s| s == site));
            }
        }
    }
}
