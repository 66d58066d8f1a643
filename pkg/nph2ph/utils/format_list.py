def to_list(x):
    """
    This utility just check if input X is a list
    If not, turns X into a list (tuples keep their items, anything else
    becomes a list of one element)
    """
    if type(x) is list:
        return x
    if type(x) is tuple:
        return list(x)
    return [x]


def parse_float_list(text: str) -> list:
    """
    Reads a comma separated option such as "0.90,0.999" into floats.
    """
    items = [item.strip() for item in str(text).split(",")]
    if not all(items):
        raise ValueError(f"Empty item in list '{text}'")
    return [float(item) for item in items]
