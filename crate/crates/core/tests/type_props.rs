use clls::syntax::{parse_source, Decl};
use clls::types::{dual, Prim, SessionType as T, TypeEnv};
use proptest::prelude::*;

fn env() -> TypeEnv {
    let src = "type rec List(A){ choice of { |#Nil: close |#Cons: pair A; List(A) } };;
               type corec AIntStream { affine send !lint; AIntStream };;
               type tmenu { offer of { | #Dup: recv ~lint; send lint; wait | #Add: recv ~lint; recv ~lint; send lint; wait } };;";
    let mut env = TypeEnv::new();
    let decls = parse_source(src).unwrap();
    for d in &decls {
        if let Decl::Types(g) = d {
            env.insert_group(g);
        }
    }
    for d in &decls {
        for n in d.names() {
            env.validate_def(n).unwrap();
        }
    }
    env
}

fn leaf(vars: bool) -> BoxedStrategy<T> {
    let mut leaves = vec![
        Just(T::Close).boxed(),
        Just(T::Wait).boxed(),
        Just(T::Prim(Prim::Int)).boxed(),
        Just(T::DualPrim(Prim::Str)).boxed(),
        Just(T::named("AIntStream", vec![])).boxed(),
        Just(T::named("tmenu", vec![])).boxed(),
    ];
    if vars {
        leaves.push(any::<bool>().prop_map(|d| T::Var("x".into(), d)).boxed());
    }
    proptest::strategy::Union::new(leaves).boxed()
}

/// Types of depth at most 6. With `vars`, the variable `x` may occur, always
/// beneath a send so that the surrounding binder is contractive.
fn ty(vars: bool) -> impl Strategy<Value = T> {
    leaf(vars).prop_recursive(5, 48, 3, |inner| {
        let labels = prop::sample::subsequence(vec!["A", "B", "C"], 1..=3);
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| T::send(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| T::recv(a, b)),
            (labels.clone(), prop::collection::vec(inner.clone(), 3)).prop_map(|(ls, ts)| {
                T::Offer(ls.into_iter().zip(ts).map(|(l, t)| (l.to_string(), t)).collect())
            }),
            (labels, prop::collection::vec(inner.clone(), 3)).prop_map(|(ls, ts)| {
                T::Choice(ls.into_iter().zip(ts).map(|(l, t)| (l.to_string(), t)).collect())
            }),
            inner.clone().prop_map(|t| T::Bang(Box::new(t))),
            inner.clone().prop_map(|t| T::Affine(Box::new(t))),
            inner.clone().prop_map(|t| T::Usage(Box::new(t))),
            inner.clone().prop_map(|t| T::named("List", vec![t])),
            inner.prop_map(|t| T::Rec("y".into(), Box::new(T::send(T::Prim(Prim::Int), t)))),
        ]
    })
}

fn rec_ty() -> impl Strategy<Value = T> {
    (any::<bool>(), ty(true)).prop_map(|(co, b)| {
        let body = Box::new(T::send(T::Prim(Prim::Int), b));
        if co {
            T::Corec("x".into(), body)
        } else {
            T::Rec("x".into(), body)
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn dual_is_an_involution(t in ty(false)) {
        let e = env();
        prop_assert_eq!(dual(&dual(&t)), t.clone());
        prop_assert!(e.type_equal(&dual(&dual(&t)), &t));
        prop_assert!(e.equiv(&dual(&dual(&t)), &t));
    }

    #[test]
    fn dual_commutes_with_unfold(t in rec_ty()) {
        let e = env();
        let a = dual(&e.unfold(&t).unwrap());
        let b = e.unfold(&dual(&t)).unwrap();
        prop_assert!(e.type_equal(&a, &b), "{} vs {}", a, b);
        prop_assert!(e.equiv(&a, &b));
    }

    #[test]
    fn dual_commutes_with_named_unfold(t in ty(false)) {
        let e = env();
        let l = T::named("List", vec![t]);
        let a = dual(&e.unfold(&l).unwrap());
        let b = e.unfold(&dual(&l)).unwrap();
        prop_assert!(e.type_equal(&a, &b), "{} vs {}", a, b);
    }

    #[test]
    fn unfolding_preserves_equivalence(t in rec_ty()) {
        let e = env();
        prop_assert!(e.equiv(&t, &e.unfold(&t).unwrap()));
    }

    #[test]
    fn equivalence_relation_spot_checks(a in ty(false), b in ty(false)) {
        let e = env();
        prop_assert!(e.type_equal(&a, &a));
        prop_assert!(e.equiv(&a, &a));
        prop_assert_eq!(e.type_equal(&a, &b), e.type_equal(&b, &a));
        prop_assert_eq!(e.equiv(&a, &b), e.equiv(&b, &a));
        if e.type_equal(&a, &b) {
            prop_assert!(e.equiv(&a, &b));
        }
        // Transitivity through a duality round trip.
        let c = dual(&dual(&b));
        if e.equiv(&a, &b) {
            prop_assert!(e.equiv(&a, &c));
        }
    }

    #[test]
    fn normalization_is_idempotent(t in ty(false)) {
        let e = env();
        let wrapped = T::State(Box::new(t));
        let once = e.well_formed(&wrapped).unwrap();
        prop_assert_eq!(e.well_formed(&once).unwrap(), once.clone());
        prop_assert!(e.is_disposable(&once));
        prop_assert!(e.is_disposable(&dual(&once)));
    }
}
