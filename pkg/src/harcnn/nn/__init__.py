from .layers import (
    ConvLayerSpec,
    DenseLayerSpec,
    PoolLayerSpec,
    batchnorm_backward,
    batchnorm_forward,
    dense_backward,
    dense_forward,
    depthwise_conv_backward,
    depthwise_conv_forward,
    dropout,
    maxpool_backward,
    maxpool_forward,
    relu,
    relu_backward,
    softmax,
    softmax_cross_entropy,
)
from .network import (
    NetworkSpec,
    NetworkState,
    init_state,
    network_backward,
    network_forward,
    predict_proba,
    zero_state,
)
from .checkpoint import load_checkpoint, save_checkpoint
