#![no_main]
use libfuzzer_sys::fuzz_target;

const MAX_INPUT: usize = 64 * 1024;

fuzz_target!(|data: &[u8]| {
    if data.len() > MAX_INPUT {
        return;
    }
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(m) = ewens_hoeffding::io::parse_matrix_csv(text) {
        let mut buf = Vec::new();
        ewens_hoeffding::io::write_matrix_csv(&mut buf, &m).unwrap();
        let back =
            ewens_hoeffding::io::parse_matrix_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, m);
    }
});
