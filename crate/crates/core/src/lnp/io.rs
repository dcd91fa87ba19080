use std::io::{Read, Write};

use super::LabelMatrix;
use crate::error::{Error, Result};

/// Class names in sorted order; a class index is a position in this list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassSet {
    names: Vec<String>,
}

impl ClassSet {
    pub fn from_names<'a>(names: impl IntoIterator<Item = &'a str>) -> Self {
        let mut names: Vec<String> = names.into_iter().map(str::to_string).collect();
        names.sort();
        names.dedup();
        ClassSet { names }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.binary_search_by(|n| n.as_str().cmp(name)).ok()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Reads `entity,class` rows (header required). Duplicated entities are an error.
pub fn read_labels<R: Read>(r: R) -> Result<Vec<(String, String)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut out: Vec<(String, String)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for rec in rdr.records() {
        let rec = rec?;
        let (Some(e), Some(c)) = (rec.get(0), rec.get(1)) else {
            return Err(Error::Data("label row needs entity and class".into()));
        };
        if e.is_empty() || c.is_empty() {
            return Err(Error::Data("empty entity or class in label file".into()));
        }
        if !seen.insert(e.to_string()) {
            return Err(Error::Data(format!("entity {e} labeled twice")));
        }
        out.push((e.to_string(), c.to_string()));
    }
    Ok(out)
}

/// `entity,class,score_1..score_C`; an undecided row has an empty class.
pub fn write_predictions<W: Write>(
    w: W,
    ids: &[String],
    classes: &ClassSet,
    predicted: &[Option<usize>],
    scores: &LabelMatrix,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["entity".to_string(), "class".to_string()];
    header.extend((1..=scores.classes).map(|c| format!("score_{c}")));
    wtr.write_record(&header)?;
    for (i, id) in ids.iter().enumerate() {
        let mut row = vec![id.clone(), predicted[i].map(|c| classes.name(c).to_string()).unwrap_or_default()];
        row.extend(scores.row(i).iter().map(|v| v.to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("predictions", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_roundtrip_and_errors() {
        let l = read_labels("entity,class\nCA, Clinton\nNE,Trump\n".as_bytes()).unwrap();
        assert_eq!(l, vec![("CA".into(), "Clinton".into()), ("NE".into(), "Trump".into())]);
        assert!(read_labels("entity,class\nCA,x\nCA,y\n".as_bytes()).is_err());
        let cs = ClassSet::from_names(l.iter().map(|p| p.1.as_str()));
        assert_eq!(cs.index("Trump"), Some(1));
        assert_eq!(cs.index("Other"), None);
    }

    #[test]
    fn prediction_csv() {
        let cs = ClassSet::from_names(["a", "b"]);
        let scores = LabelMatrix {
            classes: 2,
            data: vec![0.25, 0.75, 1.0, 0.0],
        };
        let mut buf = Vec::new();
        write_predictions(&mut buf, &["x".into(), "y".into()], &cs, &[Some(1), None], &scores).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "entity,class,score_1,score_2\nx,b,0.25,0.75\ny,,1,0\n");
    }
}
