from .model import (
    CompGraph, NodeDef, NodeOp, OpKind, validate, enumerate_paths, depth,
    path_counts, distortion_to_terminal, explicit_distortion_sum,
)
from .document import load_graph, save_graph, graph_from_dict, graph_to_dict
from .builders import (
    build_bubble_sort_graph, build_chain_graph, build_diamond_graph,
    build_sum_of_three_graph, random_dag,
)
