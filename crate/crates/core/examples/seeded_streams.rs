use cvquad::harness::cell_stream;
use cvquad::sampling::RngStream;

fn main() {
    // Each (n, rep) cell owns an independent stream, so results do not
    // depend on scheduling order.
    for (n, rep) in [(256, 0), (256, 1), (512, 0)] {
        let mut a = RngStream::new(42, cell_stream(n, rep));
        let mut b = RngStream::new(42, cell_stream(n, rep));
        let first: Vec<f64> = (0..3).map(|_| a.uniform()).collect();
        assert_eq!(first, (0..3).map(|_| b.uniform()).collect::<Vec<_>>());
        println!("n = {n:>4} rep = {rep}  stream {:#x}  {first:.6?}", cell_stream(n, rep));
    }
}
