class Stack{
  int size = 0;
  Object[] elementData = new Object[maxSize];
  boolean transactionsEnabled = true;
  void push(Object o){
    Lock l = lock();
    elementData[size++] = o;
    unlock(l);
  }
  Object pop(){
    Lock l = lock();
    Object r = elementData[--size];
    unlock(l);
    return r;
  }
  Lock lock(){
    if (!transactionsEnabled) return null;
    return Lock.acquire();
  }
  void unlock(Lock lock){/*...*/}
  String getLockVersion() { return "1.0";}
}
class Lock {/*...*/}
