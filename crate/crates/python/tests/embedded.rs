use pyo3::ffi::c_str;
use pyo3::prelude::*;

use imitlab_py::imitlab_py;

// One interpreter per process, so every check lives in a single test.
#[test]
fn module_works_from_embedded_interpreter() {
    pyo3::append_to_inittab!(imitlab_py);
    Python::initialize();
    Python::attach(|py| {
        py.run(
            c_str!(
                r#"
from decimal import Decimal as D
import imitlab_py as m
assert m.fnv1a_64("good") == 0x9ce4d6720e9c9118
r = m.cost_report(1000, "0.001", "0.05")
assert D(r["api_cost"]) == 1 and D(r["human_cost"]) == 50 and D(r["ratio"]) == 50, r
assert abs(m.tv_distance([0.5, 0.5], [1.0, 0.0]) - 0.5) < 1e-12
xs = [[float(i % 2), 1.0] for i in range(40)]
ys = [i % 2 for i in range(40)]
v = m.Model.train(xs, ys, 2, epochs=200, learning_rate=0.5, seed=1)
assert v.accuracy(xs, ys) == 1.0
e = m.VictimEndpoint(v, price_per_query="0.01", seed=3)
a = m.imitate([e], xs, strategy="concat", label_mode="soft", epochs=200, learning_rate=0.5)
assert e.query_count == 40 and D(e.total_cost) == D("0.40"), (e.query_count, e.total_cost)
assert a.accuracy(xs, ys) == 1.0
assert m.Model.from_bytes(a.to_bytes()).predict([1.0, 1.0])[1] == 1
"#
            ),
            None,
            None,
        )
        .unwrap();
    });
}
