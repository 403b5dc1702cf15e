package lang;

class English extends Language {
  String greeting() { return "hello"; }
}
