use crc_core::expr::{is_identically_zero, parse, DomainBox, Point, Variable, VariableTable, ZeroTest, ZeroVerdict};
use num_complex::Complex64;

fn table() -> VariableTable {
    let mut t = VariableTable::new();
    t.declare(Variable::real("t1")).unwrap();
    t.declare(Variable::real("t2")).unwrap();
    t
}

const RHO: &str = "((1-12*t1*t2)^(3/2)+18*t1*t2-1)/(108*t2^2)";

#[test]
fn example_second_derivative() {
    let t = table();
    let rho = parse(RHO, &t).unwrap();
    let r11 = rho.differentiate("t1").differentiate("t1");
    let expected = parse("(1-12*t1*t2)^(-1/2)", &t).unwrap();
    assert!((&r11 - &expected).is_zero_exact(), "{r11}");
    let mut p = Point::new();
    p.bind(&Variable::real("t1"), Complex64::new(0.05, 0.0)).unwrap();
    p.bind(&Variable::real("t2"), Complex64::new(0.05, 0.0)).unwrap();
    let v = r11.evaluate(&p).unwrap();
    assert!((v.re - 0.97f64.powf(-0.5)).abs() < 1e-12 * v.re);
}

#[test]
fn example_monge_ampere_and_s() {
    let t = table();
    let rho = parse(RHO, &t).unwrap();
    let r1 = rho.differentiate("t1");
    let r11 = r1.differentiate("t1");
    let r12 = r1.differentiate("t2");
    let r22 = rho.differentiate("t2").differentiate("t2");
    let ma = &(&r11 * &r22) - &(&r12 * &r12);
    let test = ZeroTest::new(DomainBox::parse("t1=0.02:0.08,t2=0.02:0.08").unwrap());
    assert_eq!(is_identically_zero(&ma, &test).unwrap(), ZeroVerdict::Zero);
    let s = (&r12 / &r11).differentiate("t1");
    assert_eq!(is_identically_zero(&s, &test).unwrap(), ZeroVerdict::NonZero);
    let expected = parse("(1-sqrt(1-12*t1*t2))/(t2*sqrt(1-12*t1*t2))", &t).unwrap();
    assert_eq!(
        is_identically_zero(&(&s - &expected), &test).unwrap(),
        ZeroVerdict::Zero
    );
    println!(
        "ma = {ma}\ns = {s}\nS-expected exact: {}",
        (&s - &expected).is_zero_exact()
    );
}

#[test]
fn division_by_zero_reported() {
    let t = table();
    let e = parse("1/t2", &t).unwrap();
    let mut p = Point::new();
    p.bind(&Variable::real("t2"), Complex64::new(0.0, 0.0)).unwrap();
    assert!(e.evaluate(&p).is_err());
}
