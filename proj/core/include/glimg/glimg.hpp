#pragma once

#include "glimg/clustering.hpp"
#include "glimg/dataset.hpp"
#include "glimg/engine.hpp"
#include "glimg/error.hpp"
#include "glimg/eval.hpp"
#include "glimg/itemgraph.hpp"
#include "glimg/model_io.hpp"
