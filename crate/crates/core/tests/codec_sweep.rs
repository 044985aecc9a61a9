use std::num::NonZeroU32;

use episteme_core::typannot::{decode, decode_records, encode, encode_records, Contrast, ProsodicQualifier, TypannotRecord};
use episteme_core::{DofId, DofKind, Notch, SegmentId, Side};
use proptest::prelude::*;

const CONTRASTS: [Contrast; 3] = [Contrast::None, Contrast::Plus, Contrast::Minus];
const SIDES: [Side; 3] = [Side::None, Side::Left, Side::Right];
const TIMES: [(u64, u64); 4] = [(0, 1), (0, 1000), (105_000, 107_500), (59_999, 3_600_007)];

fn qualifier_space() -> Vec<ProsodicQualifier> {
    let reps = [None, NonZeroU32::new(1), NonZeroU32::new(4), NonZeroU32::new(123)];
    let mut out = Vec::new();
    for speed in CONTRASTS {
        for amplitude in CONTRASTS {
            for repetitions in reps {
                out.push(ProsodicQualifier { speed, amplitude, repetitions });
            }
        }
    }
    out
}

/// Every legal (segment, dof, side, notch, qualifier) combination, each paired
/// with every time pair.
fn record_space() -> Vec<TypannotRecord> {
    let qualifiers = qualifier_space();
    let mut out = Vec::new();
    for segment in SegmentId::ALL {
        for kind in DofKind::ALL {
            for side in SIDES {
                let dof = DofId::new(kind, side);
                if !dof.is_legal_on(segment) {
                    continue;
                }
                for rank in -4..=4 {
                    let notch = Notch::from_rank(rank).unwrap();
                    for q in &qualifiers {
                        for (start_ms, end_ms) in TIMES {
                            out.push(TypannotRecord { segment, dof, notch, qualifiers: *q, start_ms, end_ms });
                        }
                    }
                }
            }
        }
    }
    out
}

#[test]
fn exhaustive_round_trip() {
    let space = record_space();
    assert!(space.len() >= 10_000, "only {} cases", space.len());
    for record in &space {
        let text = encode(record).unwrap();
        assert_eq!(decode(&text).as_ref(), Ok(record), "{text}");
        // Canonical: re-encoding the decoded value gives the same text.
        assert_eq!(encode(&decode(&text).unwrap()).unwrap(), text);
    }
}

#[test]
fn illegal_sides_are_rejected_both_ways() {
    let mut seen = 0;
    for segment in SegmentId::ALL {
        for kind in DofKind::ALL {
            for side in [Side::Left, Side::Right] {
                let dof = DofId::new(kind, side);
                if dof.is_legal_on(segment) {
                    continue;
                }
                seen += 1;
                let record = TypannotRecord {
                    segment,
                    dof,
                    notch: Notch::Neutral,
                    qualifiers: ProsodicQualifier::default(),
                    start_ms: 0,
                    end_ms: 10,
                };
                assert!(encode(&record).is_err());
                let text = format!("{}:{}:{}=NEUTRAL@0.00-0.01", segment.as_str(), kind.as_str(), side.as_str());
                assert!(decode(&text).is_err(), "{text}");
            }
        }
    }
    // Sided FLXEXT on every segment, plus sided ABDADD/RINREX on TETE.
    assert_eq!(seen, 4 * 2 + 2 * 2);
}

#[test]
fn whole_file_round_trip() {
    let space = record_space();
    let text = encode_records(&space).unwrap();
    assert_eq!(decode_records(&text).unwrap(), space);
}

fn arb_record() -> impl Strategy<Value = TypannotRecord> {
    let seg = prop::sample::select(SegmentId::ALL.to_vec());
    let kind = prop::sample::select(DofKind::ALL.to_vec());
    let side = prop::sample::select(SIDES.to_vec());
    let contrast = prop::sample::select(CONTRASTS.to_vec());
    (seg, kind, side, -4i32..=4, contrast.clone(), contrast, prop::option::of(1u32..100_000), 0u64..10_000_000, 1u64..10_000_000)
        .prop_filter_map("illegal side", |(segment, kind, side, rank, speed, amplitude, reps, start_ms, len)| {
            let dof = DofId::new(kind, side);
            dof.is_legal_on(segment).then(|| TypannotRecord {
                segment,
                dof,
                notch: Notch::from_rank(rank).unwrap(),
                qualifiers: ProsodicQualifier { speed, amplitude, repetitions: reps.and_then(NonZeroU32::new) },
                start_ms,
                end_ms: start_ms + len,
            })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4096))]

    #[test]
    fn random_records_round_trip(record in arb_record()) {
        let text = encode(&record).unwrap();
        prop_assert_eq!(decode(&text).unwrap(), record);
    }

    #[test]
    fn decode_never_panics(s in "[A-Z:=_;@.+\\-0-9xva]{0,48}") {
        if let Ok(record) = decode(&s) {
            prop_assert_eq!(encode(&record).unwrap(), s);
        }
    }
}
