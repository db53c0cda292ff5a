#![no_main]

use libfuzzer_sys::fuzz_target;
use shfd::eval::DatasetManifest;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(manifest) = DatasetManifest::from_json(text, "corpus") {
        let again = DatasetManifest::from_json(&manifest.to_json(), "corpus").expect("round trip");
        assert_eq!(again.entries, manifest.entries);
    }
});
