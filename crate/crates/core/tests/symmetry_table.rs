use spacegen_core::symmetry::space_group_table;
use spacegen_core::load_space_group;

fn centering(symbol: &str) -> usize {
    match symbol.chars().next().unwrap() {
        'P' => 1,
        'A' | 'B' | 'C' | 'I' => 2,
        'R' => 3,
        'F' => 4,
        c => panic!("unexpected lattice letter {c}"),
    }
}

fn point_group_orders(number: u16) -> &'static [usize] {
    match number {
        1..=2 => &[1, 2],
        3..=15 => &[2, 4],
        16..=74 => &[4, 8],
        75..=142 => &[4, 8, 16],
        143..=167 => &[3, 6, 12],
        168..=194 => &[6, 12, 24],
        195..=230 => &[12, 24, 48],
        _ => unreachable!(),
    }
}

#[test]
fn every_group_satisfies_axioms_and_order_rules() {
    let groups = space_group_table().groups();
    assert_eq!(groups.len(), 230);
    for (i, g) in groups.iter().enumerate() {
        assert_eq!(usize::from(g.number()), i + 1);
        g.check_axioms().unwrap();
        let c = centering(g.hm_symbol());
        assert_eq!(g.centering_count(), c, "{g}");
        assert!(point_group_orders(g.number()).contains(&g.point_group_order()), "{g}");
        assert_eq!(g.order(), c * g.point_group_order(), "{g}");
    }
}

#[test]
fn spot_checked_orders() {
    for (key, order) in [("P1", 1), ("Pm-3m", 48), ("P4/mmm", 16), ("Cmme", 16), ("Fd-3m", 192), ("P63/mmc", 24), ("R-3c", 36), ("P21/c", 4)] {
        assert_eq!(load_space_group(key).unwrap().order(), order, "{key}");
    }
}
