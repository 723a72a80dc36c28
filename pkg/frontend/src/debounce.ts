// Input debouncing and stale-response discarding for typeahead filters.

export interface Debounced<A extends unknown[]> {
  (...args: A): void;
  cancel(): void;
  flush(): void;
}

export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  wait = 120,
): Debounced<A> {
  let timer: ReturnType<typeof setTimeout> | undefined;
  let pending: A | undefined;
  const wrapped = (...args: A) => {
    pending = args;
    clearTimeout(timer);
    timer = setTimeout(() => {
      timer = undefined;
      const args2 = pending as A;
      pending = undefined;
      fn(...args2);
    }, wait);
  };
  wrapped.cancel = () => {
    clearTimeout(timer);
    timer = undefined;
    pending = undefined;
  };
  wrapped.flush = () => {
    if (timer !== undefined && pending !== undefined) {
      clearTimeout(timer);
      const args = pending;
      timer = undefined;
      pending = undefined;
      fn(...args);
    }
  };
  return wrapped;
}

/** Runs async lookups and applies only the most recently issued one, so a
 * slow earlier response can never overwrite a newer keystroke's result. */
export class SequencedLookup {
  private seq = 0;

  async run<T>(task: () => Promise<T>, apply: (value: T) => void): Promise<void> {
    const ticket = ++this.seq;
    const value = await task();
    if (ticket === this.seq) apply(value);
  }

  invalidate(): void {
    this.seq++;
  }
}
