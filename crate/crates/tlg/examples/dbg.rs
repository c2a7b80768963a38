use tlg::exact_algebra::Rat;
use tlg::geom::QP;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let model = args.get(1).map(String::as_str).unwrap_or("dp4");
    let k: i64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(3);
    let pt = |i: usize, def: (i64, i64, i64, i64)| -> QP {
        match args.get(i) {
            Some(s) => {
                let p: Vec<i64> = s.split(',').map(|c| c.parse().unwrap()).collect();
                QP([Rat::new(p[0], p[1]), Rat::new(p[2], p[3])])
            }
            None => QP([Rat::new(def.0, def.1), Rat::new(def.2, def.3)]),
        }
    };
    let p = pt(3, (1, 7, -1, 9));
    let scene = tlg::model_library::scene(model).unwrap();
    let t0 = std::time::Instant::now();
    let ws = match tlg::wall_structure::build(&scene, k) {
        Ok(ws) => ws,
        Err(e) => {
            println!("BUILD ERROR: {e}");
            return;
        }
    };
    let t1 = std::time::Instant::now();
    let cons = ws.all_joints_consistent();
    let t2 = std::time::Instant::now();
    println!(
        "walls: {} joints: {} consistent: {} (build {:?}, check {:?})",
        ws.walls.len(),
        ws.joints.len(),
        cons,
        t1 - t0,
        t2 - t1
    );
    if std::env::var("TLG_WALLS").is_ok() {
        for w in &ws.walls {
            if !w.func.is_one() {
                println!(
                    "wall ({}, {}) dir {:?} len {:?} kink {} func {:?}",
                    w.base.x(), w.base.y(), w.dir,
                    w.len.as_ref().map(|l| l.to_f64()),
                    w.kink, w.func
                );
            }
        }
    }
    if let Ok(filter) = std::env::var("TLG_LINES") {
        let want: Vec<i64> = filter.split(',').map(|c| c.parse().unwrap()).collect();
        match tlg::broken_lines::enumerate(&ws, &p) {
            Ok(lines) => {
                for l in &lines {
                    if !want.is_empty() && (l.exponent[0] != want[0] || l.exponent[1] != want[1]) {
                        continue;
                    }
                    println!(
                        "line t^{} z^{:?} coeff {}",
                        l.torder, l.exponent, l.coeff
                    );
                    for pc in &l.pieces {
                        println!(
                            "  piece from ({}, {}) dir {:?} len {:?} exp {:?}",
                            pc.from.x(), pc.from.y(), pc.dir,
                            pc.len.as_ref().map(|x| x.to_f64()),
                            pc.exponent
                        );
                    }
                }
            }
            Err(e) => println!("LINES ERROR: {e}"),
        }
    }
    match tlg::potential::superpotential_in(&ws, &p) {
        Ok(pot) => {
            println!("W({},{}) @ k={}:", p.x(), p.y(), k);
            for t in pot.series.iter_terms() {
                println!("  t^{} z^({:?})  {}", t.torder, t.exp, t.coeff);
            }
        }
        Err(e) => println!("POTENTIAL ERROR: {e}"),
    }
}
// (wall dump appended at build time)
