//! Build an AISCOCO document, attach AIS to a box, write it canonically and
//! show what validation reports for a bad file.
//!
//!     cargo run --example aiscoco_io

use chrono::{TimeZone, Utc};
use rawsea::ais::AisRecord;
use rawsea::aiscoco::{merge_ais, parse_aiscoco, to_canonical_string, AiscocoDoc, FLAG_CLOUD, FLAG_WAKE};
use rawsea::bbox::BBox;

fn main() -> anyhow::Result<()> {
    let t = Utc.with_ymd_and_hms(2021, 6, 1, 10, 30, 0).unwrap();
    let mut doc = AiscocoDoc::empty();
    let img = doc.push_image(
        "S2B_20210601_T32UNG",
        256,
        256,
        t,
        [
            (BBox::from_xywh([40.0, 52.0, 14.0, 6.0]), Some(0.91)),
            (BBox::from_xywh([120.0, 80.0, 9.0, 4.0]), None),
        ],
        1,
    );
    let first = doc.annotations_for(img).map(|a| a.id).min().unwrap();
    doc.annotation_mut(first).unwrap().attributes.flags = Some(vec![FLAG_WAKE, FLAG_CLOUD]);

    let ais: Vec<AisRecord> = [-60i64, 60]
        .iter()
        .map(|&dt| AisRecord {
            mmsi: 219_004_321,
            timestamp: t + chrono::Duration::seconds(dt),
            lat: 55.601 + dt as f64 * 1e-6,
            lon: 10.902,
            sog: Some(8.2),
            nav_status: "Under way using engine".into(),
            ship_type: "Cargo".into(),
            length_m: Some(120.0),
            width_m: Some(18.0),
        })
        .collect();
    let doc = merge_ais(&doc, [(first, 219_004_321)], &ais)?;
    let text = to_canonical_string(&doc)?;
    print!("{text}");
    assert_eq!(to_canonical_string(&parse_aiscoco(&text)?)?, text);

    let mut bad: serde_json::Value = serde_json::from_str(&text)?;
    bad["annotations"][0]["attributes"]["flags"][0] = 5.into();
    match parse_aiscoco(&bad.to_string()) {
        Err(e) => println!("\nrejected: {e}"),
        Ok(_) => println!("\nunexpectedly accepted"),
    }
    Ok(())
}
