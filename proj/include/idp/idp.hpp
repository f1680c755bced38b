#pragma once

#include "common.hpp"
#include "config.hpp"
#include "contextualizer.hpp"
#include "corpus.hpp"
#include "end_model.hpp"
#include "label_model.hpp"
#include "lf.hpp"
#include "selection.hpp"
#include "session.hpp"
#include "simulator.hpp"
#include "synthetic.hpp"
