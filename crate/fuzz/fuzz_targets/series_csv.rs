#![no_main]

use kickent::runner::io::{read_table, write_table};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(table) = read_table(text) {
        let columns: Vec<&str> = table.columns.iter().map(String::as_str).collect();
        let written = write_table(&table.config_sha256, &columns, &table.rows);
        let reread = read_table(&written).expect("written table reparses");
        let columns: Vec<&str> = reread.columns.iter().map(String::as_str).collect();
        assert_eq!(write_table(&reread.config_sha256, &columns, &reread.rows), written);
    }
});
