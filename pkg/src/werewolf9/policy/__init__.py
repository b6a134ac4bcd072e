from .nets import Adam, Mlp, load_checkpoint, masked_log_softmax, save_checkpoint, softmax
from .features import (CTX_DIM, PUB_DIM, ROW_DIM, ROLE_ORDER, ROLE_INDEX,
                       SpeechTape, action_index, index_to_action, legal_mask,
                       n_options, public_features, context_features)
from .thinker import (ForwardOutput, ObsSnapshot, BatchInputs, ThinkerConfig,
                      ThinkerParams, encode, forward, sample_action,
                      sample_instruction, trunk_forward, trunk_backward,
                      seat_head_forward, seat_head_backward,
                      instr_head_forward, instr_head_backward,
                      identity_forward, identity_backward,
                      value_forward, value_backward,
                      SEAT_HEAD_TYPES, GO_HEAD_TYPES, REFERENCE_WIDTHS)
