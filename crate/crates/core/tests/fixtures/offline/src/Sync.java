class Sync {
  boolean connected;

  void store(String note) {
    if (!connected) {
      saveLocally(note);
    } else {
      upload(note);
    }
  }

  void saveLocally(String note) {}
  void upload(String note) {}
}
