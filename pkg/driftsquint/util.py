import os
import petl as etl

from driftsquint.errors import ConfigError

# join one or more inputs into a string
# separated by space. falsy arguments are
# ignored
def join(*args):
    result = ""
    for arg in args:
        if arg:
            result += " %s" % arg
    return result.strip()


# render a set of 0-based expert indices
# the way reports show them
def expert_label(indices):
    return join(*[int(k) + 1 for k in sorted(indices)])


number = etl.numparser()

# recursively make directories
def mkdirp(path):
    if path and not os.path.exists(path):
        os.makedirs(path)


# resolve a relative path against an output
# directory (defaults to the working directory)
def resolve(path, root=None):
    if os.path.isabs(path):
        return path
    return "{0}/{1}".format(root or ".", path)


# size of the worker pool, capped by DRIFTSQUINT_THREADS
def worker_count(default=None):
    cap = os.environ.get("DRIFTSQUINT_THREADS")
    count = default or os.cpu_count() or 1
    if cap:
        try:
            count = min(count, int(cap))
        except ValueError:
            raise ConfigError("DRIFTSQUINT_THREADS must be an integer, got %r" % cap) from None
    return max(1, count)

