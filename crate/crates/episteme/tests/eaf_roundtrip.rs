use episteme::eaf::{read_eaf, write_document, write_eaf, EafDocument, MediaDescriptor};
use episteme::core::agreement::{Annotation, Tier};
use proptest::prelude::*;

/// Non-overlapping annotations built from gaps and lengths in ms.
fn tier_strategy(id: String) -> impl Strategy<Value = Tier> {
    prop::collection::vec((0u64..500, 1u64..2000, "[ -~]{0,12}|[&<>\"' \t]{1,6}|é·中"), 0..8).prop_map(move |spans| {
        let mut t = 0;
        let annotations = spans
            .into_iter()
            .map(|(gap, len, value)| {
                let start = t + gap;
                t = start + len;
                Annotation::new(start, t, value)
            })
            .collect();
        Tier::new(id.clone(), annotations).unwrap()
    })
}

fn tiers_strategy() -> impl Strategy<Value = Vec<Tier>> {
    prop::collection::btree_set("[A-Za-z][A-Za-z0-9_-]{0,8}", 0..5)
        .prop_flat_map(|ids| ids.into_iter().map(tier_strategy).collect::<Vec<_>>())
}

proptest! {
    #[test]
    fn write_then_read_is_exact(tiers in tiers_strategy()) {
        let text = write_eaf(&tiers, None).unwrap();
        let doc = read_eaf(text.as_bytes()).unwrap();
        prop_assert_eq!(&doc.tiers, &tiers);
        prop_assert_eq!(write_document(&doc).unwrap(), text);
    }

    #[test]
    fn tiers_come_back_sorted_by_id(mut tiers in tiers_strategy()) {
        tiers.reverse();
        let doc = read_eaf(write_eaf(&tiers, None).unwrap().as_bytes()).unwrap();
        let ids: Vec<&str> = doc.tiers.iter().map(|t| t.id.as_str()).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        prop_assert_eq!(ids, sorted);
    }
}

#[test]
fn media_and_header_survive() {
    let tiers = vec![Tier::new("CALIB", vec![Annotation::new(400, 600, "REST")]).unwrap()];
    let mut doc = EafDocument::new(tiers);
    doc.media = Some(MediaDescriptor::for_path("clips/fr 01.mp4"));
    doc.author = "a & b".into();
    let text = write_document(&doc).unwrap();
    let back = read_eaf(text.as_bytes()).unwrap();
    assert_eq!(back, doc);
}

#[test]
fn shared_boundaries_share_a_slot() {
    let tiers = vec![Tier::new("T", vec![Annotation::new(0, 1000, "a"), Annotation::new(1000, 2000, "b")]).unwrap()];
    let text = write_eaf(&tiers, None).unwrap();
    assert_eq!(text.matches("<TIME_SLOT ").count(), 3);
}
