#![no_main]

use kickent::runner::io::{read_grid, write_grid};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(grid) = read_grid(text) {
        let written = write_grid(&grid.config_sha256, &grid.values);
        let reread = read_grid(&written).expect("written grid reparses");
        assert_eq!(write_grid(&reread.config_sha256, &reread.values), written);
    }
});
