//! Shipped annotation records, in the same text format users write.

pub(super) const BUILTIN: &str = r#"
# name | flags | pure | choice | class | map | agg
cat | - | pure | seq | stateless | - | -

# tr is line-preserving only when neither set can produce or consume a newline
tr | lit=2 ins=0 match1=^([A-Za-z0-9_.,;:!?@%^+=/\x20-]\|\[:(upper\|lower\|alpha\|digit\|alnum\|punct\|blank):\])*$ match2=^([A-Za-z0-9_.,;:!?@%^+=/\x20-]\|\[:(upper\|lower\|alpha\|digit\|alnum\|punct\|blank):\])*$ | pure | seq | stateless | - | -
tr | -d lit=1 ins=0 match1=^([A-Za-z0-9_.,;:!?@%^+=/\x20-]\|\[:(upper\|lower\|alpha\|digit\|alnum\|punct\|blank):\])*$ | pure | seq | stateless | - | -
tr | -s lit=1 ins=0 match1=^([A-Za-z0-9_.,;:!?@%^+=/\x20-]\|\[:(upper\|lower\|alpha\|digit\|alnum\|punct\|blank):\])*$ | pure | seq | stateless | - | -
tr | -c -s lit=2 ins=0 match1=^([A-Za-z0-9_.,;:!?@%^+=/\x20-]\|\[:(upper\|lower\|alpha\|digit\|alnum\|punct\|blank):\])*$ match2=^\\n$ | pure | seq | dp | - | cat $* | tr -s '\n'
tr | [-c] [-d] [-s] lit=1 ins=0 | pure | seq | none | - | -
tr | [-c] [-d] [-s] lit=2 ins=0 | pure | seq | none | - | -

sort | - | pure | seq | dp | - | sort -m $*
sort | -n | pure | seq | dp | - | sort -m -n $*
sort | -r | pure | seq | dp | - | sort -m -r $*
sort | -n -r | pure | seq | dp | - | sort -m -n -r $*
sort | -u | pure | seq | dp | - | sort -m -u $*
sort | -m [-n] [-r] [-u] | pure | any | none | - | -

uniq | ins=1 | pure | seq | dp | - | cat $* | uniq
uniq | -c ins=1 | pure | seq | none | - | -

grep | -c [-v] [-x] [-i] [-F] [-E] [-w] -e:arg ins=1 | pure | seq | dp | - | paste -d+ $* | bc
grep | -c [-v] [-x] [-i] [-F] [-E] [-w] -f:config ins=1 | pure | seq | dp | - | paste -d+ $* | bc
grep | -c [-v] [-x] [-i] [-F] [-E] [-w] lit=1 ins=1 | pure | seq | dp | - | paste -d+ $* | bc
grep | [-v] [-x] [-i] [-F] [-E] [-w] -e:arg ins=1 | pure | seq | stateless | - | -
grep | [-v] [-x] [-i] [-F] [-E] [-w] -f:config ins=1 | pure | seq | stateless | - | -
grep | [-v] [-x] [-i] [-F] [-E] [-w] lit=1 ins=1 | pure | seq | stateless | - | -

wc | -l ins=0 | pure | seq | dp | - | paste -d+ $* | bc
wc | -w ins=0 | pure | seq | dp | - | paste -d+ $* | bc
wc | -c ins=0 | pure | seq | dp | - | paste -d+ $* | bc

sed | [-E] lit=1 match1=^s/([^/\\]\|\\.)*/([^/\\]\|\\.)*/g?$ | pure | seq | stateless | - | -
cut | [-d:arg] -f:arg | pure | seq | stateless | - | -
cut | -c:arg | pure | seq | stateless | - | -
head | [-n:arg] ins=1 | pure | seq | none | - | -
tee | [-a] outs=* | pure | seq | none | - | -
comm | [-1] [-2] [-3] ins=2-2 | pure | any | none | - | -
paste | [-d:arg] ins=1-* | pure | any | none | - | -
bc | ins=0 | pure | seq | none | - | -
col | [-b] [-x] ins=0 | pure | seq | none | - | -
sha1sum | ins=0 | pure | seq | none | - | -
"#;
