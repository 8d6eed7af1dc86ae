mod support;

use changescope_core::eval::judge::extract_numbers;
use changescope_core::eval::{bucket_difficulty, classify_error, mcnemar, Difficulty};
use changescope_core::llm::truncate_at_stop;
use changescope_core::navigator::naming::{format_filename, parse_filename, ImageId, ImageRole};
use changescope_core::navigator::parser::parse_step;
use changescope_core::raster::{LabelMask, NUM_CLASSES};
use changescope_core::toolkit::Toolkit;
use proptest::prelude::*;
use support::*;

fn mask_pair() -> impl Strategy<Value = (LabelMask, LabelMask)> {
    (1u32..=32, 1u32..=32, 1usize..=NUM_CLASSES).prop_flat_map(|(w, h, k)| {
        let n = (w * h) as usize;
        let labels = proptest::collection::vec(0u8..k as u8, n);
        (labels.clone(), labels).prop_map(move |(a, b)| {
            (LabelMask::new(w, h, a).unwrap(), LabelMask::new(w, h, b).unwrap())
        })
    })
}

fn tools(max: usize) -> impl Strategy<Value = Vec<String>> {
    proptest::collection::vec(proptest::sample::select(TOOL_NAMES.to_vec()), 0..=max)
        .prop_map(|v| v.into_iter().map(String::from).collect())
}

fn hex_id() -> impl Strategy<Value = String> {
    "[0-9a-f]{6}"
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn raster_ops_match_oracles((pre, cur) in mask_pair()) {
        prop_assert_eq!(check_raster_pair(&pre, &cur), Ok(()));
    }

    #[test]
    fn precision_recall_match_oracle(used in tools(8), required in tools(8)) {
        prop_assert_eq!(check_pr(&used, &required), Ok(()));
    }

    #[test]
    fn precision_recall_identities(seed in any::<u64>()) {
        let (used, required) = shaped_pair(&mut rng(seed));
        prop_assert_eq!(check_pr(&used, &required), Ok(()));
    }

    #[test]
    fn taxonomy_is_total_and_spares_correct_answers(p in 0.0f64..=1.0, r in 0.0f64..=1.0, correct: bool) {
        let class = classify_error(p, r, correct);
        prop_assert_eq!(class.is_none(), correct);
    }

    #[test]
    fn difficulty_is_monotone(n in 0usize..20) {
        prop_assert!(bucket_difficulty(n) <= bucket_difficulty(n + 1));
        prop_assert_eq!(bucket_difficulty(n) == Difficulty::Difficult, n >= 3);
    }

    #[test]
    fn filenames_round_trip(a in hex_id(), b in hex_id(), tag in "[a-z][a-z0-9]{0,8}", which in 0usize..5) {
        let role = match which {
            0 => ImageRole::Pre,
            1 => ImageRole::Cur,
            2 => ImageRole::CropPre,
            3 => ImageRole::CropCur,
            _ => match ImageRole::derived(&tag) {
                Ok(r) => r,
                Err(_) => return Ok(()),
            },
        };
        let (s, l) = (ImageId::parse(&a).unwrap(), ImageId::parse(&b).unwrap());
        let name = format_filename(&s, &l, &role);
        prop_assert_eq!(parse_filename(&name).unwrap(), (s, l, role));
    }

    #[test]
    fn naming_sequences_hold(seed in any::<u64>()) {
        prop_assert!(check_naming_sequence(seed).is_ok());
    }

    #[test]
    fn parsed_steps_never_carry_observations(
        thought in "[a-z ]{1,20}",
        tool in proptest::sample::select(TOOL_NAMES.to_vec()),
        input in "[a-z=, ]{0,20}",
        fake in "[A-Za-z0-9 ]{1,20}",
    ) {
        let text = format!("Thought: {thought}\nAction: {tool}\nAction Input: {input}\nObservation: {fake}\nFinal Answer: {fake}");
        let kit = Toolkit::standard(None);
        if let Ok(step) = parse_step(&text, &kit) {
            let json = serde_json::to_value(&step).unwrap();
            prop_assert_eq!(&json["observation"], "");
            prop_assert_eq!(step.tool(), Some(tool));
        }
    }

    #[test]
    fn truncation_never_keeps_a_stop(text in "[a-zA-Z:\n ]{0,80}") {
        let stops = vec!["Observation:".to_string()];
        let cut = truncate_at_stop(&text, &stops);
        prop_assert!(!cut.contains("Observation:"));
        prop_assert!(text.starts_with(cut));
    }

    #[test]
    fn mcnemar_is_symmetric_and_bounded(b in 0u64..200, c in 0u64..200) {
        prop_assume!(b + c > 0);
        let (x, y) = (mcnemar(b, c).unwrap(), mcnemar(c, b).unwrap());
        prop_assert_eq!(x.statistic, y.statistic);
        prop_assert!((0.0..=1.0).contains(&x.p_value));
        if let Some(p) = x.exact_p_value {
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn numbers_survive_formatting(n in -1_000_000i64..1_000_000) {
        let text = format!("The area changed by {n} pixels.");
        prop_assert!(extract_numbers(&text).contains(&(n as f64)));
    }
}
