//! c_max statistics for the three random point-set types.

use hodt::randgen::{cmax_experiment, write_stats_csv, Generator};

fn main() {
    let ks = [3, 4, 5, 6, 7];
    for gen in
        [Generator::Type1 { radius: 1.0 }, Generator::Type2 { radius: 1.0 }, Generator::Type3 { r1: 1.0, r2: 0.5 }]
    {
        let rows = cmax_experiment(&gen, 300, &ks, 20, 42).expect("valid generator");
        write_stats_csv(&rows, std::io::stdout()).unwrap();
    }
}
