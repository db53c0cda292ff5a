#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = shfd::imgio::decode_image(data) {
        assert_eq!(img.data().len(), img.width() * img.height());
        assert!(img.data().iter().all(|v| (0.0..=255.0).contains(v)));
    }
});
