package lang;

class Chinese extends Language {
  String greeting() { return "ni hao"; }
}
