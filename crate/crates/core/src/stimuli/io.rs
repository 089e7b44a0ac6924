use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{Continuation, StimulusError, StimulusItem};

pub const STIMULUS_HEADER: [&str; 7] = [
    "experiment",
    "item_id",
    "condition",
    "prefix",
    "continuation",
    "continuation_class",
    "measure_region",
];

/// One row per scored continuation.
pub fn write_items<W: Write>(writer: W, items: &[StimulusItem]) -> Result<(), StimulusError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(STIMULUS_HEADER)?;
    for item in items {
        for c in &item.continuations {
            w.write_record([
                item.experiment.as_str(),
                &item.item_id,
                &item.condition,
                &item.prefix,
                &c.text,
                &c.class,
                &item.measure_region,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Inverse of [`write_items`]: consecutive rows sharing experiment, item,
/// condition, prefix and region are merged into one item.
pub fn read_items<R: Read>(reader: R) -> Result<Vec<StimulusItem>, StimulusError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = r.headers()?.clone();
    if header.iter().ne(STIMULUS_HEADER) {
        return Err(StimulusError::Schema(format!(
            "stimulus header must be `{}`, found `{}`",
            STIMULUS_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut items: Vec<StimulusItem> = Vec::new();
    for record in r.records() {
        let rec = record?;
        let f = |i: usize| rec.get(i).unwrap_or_default().to_string();
        let cont = Continuation {
            text: f(4),
            class: f(5),
        };
        if let Some(last) = items.last_mut() {
            if last.experiment == rec[0]
                && last.item_id == rec[1]
                && last.condition == rec[2]
                && last.prefix == rec[3]
                && last.measure_region == rec[6]
            {
                last.continuations.push(cont);
                continue;
            }
        }
        items.push(StimulusItem {
            experiment: f(0),
            item_id: f(1),
            condition: f(2),
            prefix: f(3),
            continuations: vec![cont],
            measure_region: f(6),
        });
    }
    Ok(items)
}

pub fn emit_items(path: &Path, items: &[StimulusItem]) -> Result<(), StimulusError> {
    write_items(BufWriter::new(File::create(path)?), items)
}

pub fn load_items(path: &Path) -> Result<Vec<StimulusItem>, StimulusError> {
    read_items(File::open(path)?)
}
