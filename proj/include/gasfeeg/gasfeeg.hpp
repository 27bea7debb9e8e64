#pragma once

#include "gasfeeg/common.hpp"
#include "gasfeeg/encode.hpp"
#include "gasfeeg/eval.hpp"
#include "gasfeeg/fft.hpp"
#include "gasfeeg/image.hpp"
#include "gasfeeg/ingest.hpp"
#include "gasfeeg/nn/checkpoint.hpp"
#include "gasfeeg/nn/gradcheck.hpp"
#include "gasfeeg/nn/layers.hpp"
#include "gasfeeg/nn/network.hpp"
#include "gasfeeg/nn/optim.hpp"
#include "gasfeeg/nn/tensor.hpp"
#include "gasfeeg/nn/train.hpp"
#include "gasfeeg/pipeline.hpp"
#include "gasfeeg/select.hpp"
#include "gasfeeg/synth.hpp"
#include "gasfeeg/texture.hpp"
#include "gasfeeg/tfr.hpp"
