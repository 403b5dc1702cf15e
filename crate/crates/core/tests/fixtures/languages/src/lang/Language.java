package lang;

abstract class Language {
  abstract String greeting();
}
