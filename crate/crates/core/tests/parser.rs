mod common;

use common::random_spec::random_spec;
use common::TABLE;
use kws_core::model::{parse_model_dsl, Family, ModelFile};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn published_notations_roundtrip() {
    for row in &TABLE {
        let spec = row.spec();
        assert_eq!(spec.to_dsl(), row.dsl);
        let again = parse_model_dsl(&spec.to_dsl(), row.family, spec.input().t, spec.input().f, 12).unwrap();
        assert_eq!(again, spec);
    }
}

#[test]
fn shipped_model_files_match_the_table() {
    for row in &TABLE {
        let file = row.model_file();
        assert_eq!(file.spec, row.spec(), "{}", row.file);
        assert_eq!(ModelFile::parse(&file.to_text()).unwrap(), file);
    }
}

#[test]
fn random_specs_roundtrip() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut families = [0usize; 7];
    for _ in 0..1000 {
        let spec = random_spec(&mut rng);
        families[spec.family() as usize] += 1;
        let input = spec.input();
        let back = parse_model_dsl(&spec.to_dsl(), spec.family(), input.t, input.f, spec.classes()).unwrap();
        assert_eq!(back, spec, "{}", spec.to_dsl());
        let file = ModelFile::new(spec);
        assert_eq!(ModelFile::parse(&file.to_text()).unwrap(), file);
    }
    assert!(families.iter().all(|&c| c > 0), "{families:?}");
}

fn strip(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Deleting one character never yields a model that prints differently
    /// from the mutated text.
    #[test]
    fn deletions_fail_or_stay_faithful(row in 0usize..21, at in 0usize..200) {
        let row = &TABLE[row];
        let at = at % row.dsl.len();
        let mut text = row.dsl.to_string();
        text.remove(at);
        if let Ok(spec) = parse_model_dsl(&text, row.family, row.frames(), 10, 12) {
            prop_assert_eq!(strip(&spec.to_dsl()), strip(&text));
        }
    }

    #[test]
    fn arbitrary_text_never_panics(s in "\\PC{0,40}") {
        let _ = parse_model_dsl(&s, Family::Cnn, 49, 10, 12);
        let _ = ModelFile::parse(&s);
    }
}
