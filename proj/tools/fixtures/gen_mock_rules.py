#!/usr/bin/env python3
"""Writes the scripted mock-LLM rule files under data/mock."""
import json
import pathlib

OUT = pathlib.Path(__file__).resolve().parents[2] / "data" / "mock"

NAME = r"(?:Send a message to|Open the chat with|Call|Read the last message from) (\w+)"
rules = []
def r(**kw): rules.append(kw)

# normalize
r(phase="normalize", regex=r"Instruction: Send a message to (\w+) saying ([^\n]+)\n",
  response={"task": "send message", "parameters": {"name": "contact to message", "message": "text to send"},
            "values": {"name": "{{1}}", "message": "{{2}}"}})
r(phase="normalize", regex=r"Instruction: Send a message to (\w+)\n",
  response={"task": "send message", "parameters": {"name": "contact to message", "message": "text to send"},
            "values": {"name": "{{1}}", "message": None}})
r(phase="normalize", regex=r"Instruction: Open the chat with (\w+)\n",
  response={"task": "open chat", "parameters": {"name": "contact"}, "values": {"name": "{{1}}"}})
r(phase="normalize", regex=r"Instruction: Turn on ([^\n]+)\n",
  response={"task": "toggle setting", "parameters": {"setting": "setting to switch"}, "values": {"setting": "{{1}}"}})
r(phase="normalize", regex=r"Instruction: Open saved messages\n",
  response={"task": "open saved messages", "parameters": {}, "values": {}})
r(phase="normalize", regex=r"Instruction: Call (\w+)\n",
  response={"task": "call contact", "parameters": {"name": "contact to call"}, "values": {"name": "{{1}}"}})
r(phase="normalize", regex=r"Instruction: Save a note saying ([^\n]+)\n",
  response={"task": "save note", "parameters": {"note": "note text"}, "values": {"note": "{{1}}"}})
r(phase="normalize", regex=r"Instruction: Read the last message from (\w+)\n",
  response={"task": "read last message", "parameters": {"name": "contact"}, "values": {"name": "{{1}}"}})
r(phase="normalize", regex=r"Instruction: Open settings\n",
  response={"task": "open settings", "parameters": {}, "values": {}})

# explore, one rule per page
r(phase="explore", contains=['id="search_button"'], response=[
  {"name": "Search", "description": "Search for a contact or chat by name",
   "parameters": {"query": "who are you looking for?"}, "UI_index": 3},
  {"name": "Open_Menu", "description": "Open the navigation menu", "parameters": {}, "UI_index": 2}])
r(phase="explore", contains=['id="search_results"'], response=[
  {"name": "Select_Contact", "description": "Open the chat with one of the contacts in the search results",
   "parameters": {"name": "which contact?"}, "UI_index": 5},
  {"name": "Leave_Search", "description": "Close the search and go back to the chat list", "parameters": {}, "UI_index": 2}])
r(phase="explore", regex=r'<input index=(\d+) id="message_input"/>\n\s*<button index=(\d+) id="send_button"', response=
  '[{"name": "Send", "description": "Type a message into the input box and send it", '
  '"parameters": {"message": "what should the message say?"}, "UI_index": [{{1}}, {{2}}]}, '
  '{"name": "Call", "description": "Start a voice call with the person in this chat", "parameters": {}, "UI_index": 4}, '
  '{"name": "Close_Chat", "description": "Go back from the conversation", "parameters": {}, "UI_index": 2}]')
r(phase="explore", contains=['id="drawer"'], response=[
  {"name": "Open_Saved_Messages", "description": "Open the saved messages chat", "parameters": {}, "UI_index": 3},
  {"name": "Open_Settings", "description": "Open the app settings", "parameters": {}, "UI_index": 4},
  {"name": "Close_Menu", "description": "Close the drawer", "parameters": {}, "UI_index": 2}])
r(phase="explore", contains=['id="settings_back"'], response=[
  {"name": "Toggle_Setting", "description": "Switch a preference such as notifications or dark mode on or off",
   "parameters": {"setting": "which setting?"}, "UI_index": [5, 8, 11]},
  {"name": "Leave_Settings", "description": "Return to the menu", "parameters": {}, "UI_index": 2}])

# select: one rule per (task, step)
def sel(instr, history, response):
    hist = r"\n".join(rf"{i + 1}\. {h}\([^\n]*\)" for i, h in enumerate(history)) if history else r"\(none\)"
    r(phase="select", regex=rf"Instruction: {instr}\nCompleted sub-tasks:\n{hist}\nAvailable", response=response)

fin = {"name": "Finish", "parameters": {}}
sel(r"Send a message to (\w+) saying ([^\n]+)", [], {"name": "Search", "parameters": {"query": "{{1}}"}})
sel(r"Send a message to (\w+) saying ([^\n]+)", ["Search"], {"name": "Select_Contact", "parameters": {"name": "{{1}}"}})
sel(r"Send a message to (\w+) saying ([^\n]+)", ["Search", "Select_Contact"], {"name": "Send", "parameters": {"message": "{{2}}"}})
sel(r"Send a message to (\w+) saying ([^\n]+)", ["Search", "Select_Contact", "Send"], fin)
sel(r"Open the chat with (\w+)", [], {"name": "Search", "parameters": {"query": "{{1}}"}})
sel(r"Open the chat with (\w+)", ["Search"], {"name": "Select_Contact", "parameters": {"name": "{{1}}"}})
sel(r"Open the chat with (\w+)", ["Search", "Select_Contact"], fin)
sel(r"Turn on ([^\n]+)", [], {"name": "Open_Menu", "parameters": {}})
sel(r"Turn on ([^\n]+)", ["Open_Menu"], {"name": "Open_Settings", "parameters": {}})
sel(r"Turn on ([^\n]+)", ["Open_Menu", "Open_Settings"], {"name": "Toggle_Setting", "parameters": {"setting": "{{1}}"}})
sel(r"Turn on ([^\n]+)", ["Open_Menu", "Open_Settings", "Toggle_Setting"], fin)
sel(r"Open saved messages", [], {"name": "Open_Menu", "parameters": {}})
sel(r"Open saved messages", ["Open_Menu"], {"name": "Open_Saved_Messages", "parameters": {}})
sel(r"Open saved messages", ["Open_Menu", "Open_Saved_Messages"], fin)
sel(r"Call (\w+)", [], {"name": "Search", "parameters": {"query": "{{1}}"}})
sel(r"Call (\w+)", ["Search"], {"name": "Select_Contact", "parameters": {"name": "{{1}}"}})
sel(r"Call (\w+)", ["Search", "Select_Contact"], {"name": "Call", "parameters": {}})
sel(r"Call (\w+)", ["Search", "Select_Contact", "Call"], fin)
sel(r"Save a note saying ([^\n]+)", [], {"name": "Open_Menu", "parameters": {}})
sel(r"Save a note saying ([^\n]+)", ["Open_Menu"], {"name": "Open_Saved_Messages", "parameters": {}})
sel(r"Save a note saying ([^\n]+)", ["Open_Menu", "Open_Saved_Messages"], {"name": "Send", "parameters": {"message": "{{1}}"}})
sel(r"Save a note saying ([^\n]+)", ["Open_Menu", "Open_Saved_Messages", "Send"], fin)
sel(r"Read the last message from (\w+)", [], {"name": "Search", "parameters": {"query": "{{1}}"}})
sel(r"Read the last message from (\w+)", ["Search"], {"name": "Select_Contact", "parameters": {"name": "{{1}}"}})
sel(r"Read the last message from (\w+)", ["Search", "Select_Contact"],
    {"name": "Read_Screen", "parameters": {"question": "What is the last message in the chat?"}})
sel(r"Read the last message from (\w+)", ["Search", "Select_Contact", "Read_Screen"], fin)
sel(r"Open settings", [], {"name": "Open_Menu", "parameters": {}})
sel(r"Open settings", ["Open_Menu"], {"name": "Open_Settings", "parameters": {}})
sel(r"Open settings", ["Open_Menu", "Open_Settings"], fin)

# derive
NONE = "Actions so far:\n(none)\n"
r(phase="derive", contains=["Sub-task: Search:", NONE], response={"action": "click", "ui_index": 3})
r(phase="derive", contains=["Sub-task: Search:", "Actions so far:\n1. click(ui_index=3)\nScreen"],
  regex=r'Parameters: query="([^"]*)"[\s\S]*<input index=(\d+) id="search_field"',
  response='{"action": "input", "ui_index": {{2}}, "text": "{{1}}"}')
r(phase="derive", contains=["Sub-task: Select_Contact:", NONE],
  regex=r'Parameters: name="([^"]*)"[\s\S]*<button index=(\d+) id="contact" text="\1"/>',
  response='{"action": "click", "ui_index": {{2}}}')
r(phase="derive", contains=["Sub-task: Send:", NONE],
  regex=r'Parameters: message="([^"]*)"[\s\S]*<input index=(\d+) id="message_input"',
  response='{"action": "input", "ui_index": {{2}}, "text": "{{1}}"}')
r(phase="derive", contains=["Sub-task: Send:", "Actions so far:\n1. input("], excludes=["\n2. "],
  regex=r'<button index=(\d+) id="send_button"', response='{"action": "click", "ui_index": {{1}}}')
r(phase="derive", contains=["Sub-task: Send:", "\n2. click("], response={"done": True})
r(phase="derive", contains=["Sub-task: Call:", NONE], response={"action": "click", "ui_index": 4})
r(phase="derive", contains=["Sub-task: Call:", "\n1. click("], response={"done": True})
r(phase="derive", contains=["Sub-task: Open_Menu:", NONE], response={"action": "click", "ui_index": 2})
r(phase="derive", contains=["Sub-task: Open_Saved_Messages:", NONE], response={"action": "click", "ui_index": 3})
r(phase="derive", contains=["Sub-task: Open_Settings:", NONE], response={"action": "click", "ui_index": 4})
for value, index in [("notifications", 5), ("dark mode", 8), ("last seen", 11)]:
    r(phase="derive", contains=["Sub-task: Toggle_Setting:", NONE], regex=rf'Parameters: setting="(?:{value}|{value.capitalize()})"',
      response={"action": "click", "ui_index": index})
r(phase="derive", contains=["Sub-task: Toggle_Setting:", "\n1. click("], response={"done": True})

# slot fill
r(phase="slot_fill", contains=["Sub-task: Search:"], regex=rf"Instruction: {NAME}", response={"parameters": {"query": "{{1}}"}})
r(phase="slot_fill", contains=["Sub-task: Select_Contact:"], regex=rf"Instruction: {NAME}", response={"parameters": {"name": "{{1}}"}})
r(phase="slot_fill", contains=["Sub-task: Send:"], regex=r"Instruction: (?:Send a message to \w+|Save a note) saying ([^\n]+)\n",
  response={"parameters": {"message": "{{1}}"}})
r(phase="slot_fill", contains=["Sub-task: Send:"], response={"parameters": {"message": None}})
r(phase="slot_fill", contains=["Sub-task: Toggle_Setting:"], regex=r"Instruction: Turn on ([^\n]+)\n",
  response={"parameters": {"setting": "{{1}}"}})
r(phase="slot_fill", contains=["Sub-task: Read_Screen:"], response={"parameters": {"question": "What is the last message in the chat?"}})

# read screen
r(phase="read_screen", regex=r'<text index=\d+ id="message" text="([^"]*)"/>\n\s*</scroll>', response="The last message is \"{{1}}\".")
r(phase="read_screen", response="The screen does not show an answer.")


# in-context adaptation when contact rows carry a different id
r(phase="adapt", regex=r'Now\nInstruction: [^\n]*\nSub-task: [^\n]*\nParameters: \{"parameters":\{"name":"([^"]*)"\}\}[\s\S]*<button index=(\d+) id="contact_row" text="\1"/>',
  response='{"action": "click", "ui_index": {{2}}}')

telegram = rules


def write(name, rule_list):
    with open(OUT / name, "w") as f:
        json.dump({"rules": rule_list}, f, indent=2)
        f.write("\n")


write("telegram.rules.json", telegram)

# contacts list app
rules = []
r(phase="normalize", regex=r"Instruction: Open the contact (\w+)\n",
  response={"task": "open contact", "parameters": {"name": "contact to open"}, "values": {"name": "{{1}}"}})
r(phase="explore", contains=['id="contact_list"'], response=[
  {"name": "Open_Contact", "description": "Open the details of a contact in the list",
   "parameters": {"name": "which contact?"}, "UI_index": 5},
  {"name": "Add_Contact", "description": "Create a new contact", "parameters": {}, "UI_index": 3}])
r(phase="explore", contains=['id="detail_back"'], response=[
  {"name": "Call_Contact", "description": "Phone this person", "parameters": {}, "UI_index": 4},
  {"name": "Message_Contact", "description": "Write a text to this person", "parameters": {}, "UI_index": 5},
  {"name": "Back_To_List", "description": "Return to the contact list", "parameters": {}, "UI_index": 2}])
sel(r"Open the contact (\w+)", [], {"name": "Open_Contact", "parameters": {"name": "{{1}}"}})
sel(r"Open the contact (\w+)", ["Open_Contact"], fin)
r(phase="derive", contains=["Sub-task: Open_Contact:", "Feedback:\n- There is no change in the screen."], response={"done": True})
r(phase="derive", contains=["Sub-task: Open_Contact:"],
  regex=r'Parameters: name="([^"]*)"[\s\S]*<button index=(\d+) id="contact" text="\1"/>',
  response='{"action": "click", "ui_index": {{2}}}')
r(phase="derive", contains=["Sub-task: Open_Contact:"], regex=r'<scroll index=(\d+) id="contact_list"',
  response='{"action": "scroll", "ui_index": {{1}}, "direction": "down"}')
r(phase="slot_fill", contains=["Sub-task: Open_Contact:"], regex=r"Instruction: Open the contact (\w+)\n",
  response={"parameters": {"name": "{{1}}"}})
contacts = rules
write("contacts.rules.json", contacts)

# self-feedback scenarios, placed ahead of the regular Telegram rules
rules = []
r(phase="normalize", regex=r"Instruction: (?:Look up|Search the chats for) (\w+)\n",
  response={"task": "find contact", "parameters": {"name": "contact"}, "values": {"name": "{{1}}"}})
r(phase="normalize", regex=r"Instruction: Toggle the search bar\n", response={"task": "toggle search bar", "parameters": {}, "values": {}})
sel(r"Look up (\w+)", [], {"name": "Search", "parameters": {"query": "{{1}}"}})
sel(r"Look up (\w+)", ["Search"], fin)
sel(r"Search the chats for (\w+)", [], {"name": "Search", "parameters": {"query": "{{1}}"}})
sel(r"Search the chats for (\w+)", ["Search"], fin)
sel(r"Toggle the search bar", [], {"name": "Search", "parameters": {"query": "Bob"}})
sel(r"Toggle the search bar", ["Search"], fin)
r(phase="derive", contains=["Instruction: Look up", NONE], excludes=["Feedback:"], response={"action": "click", "ui_index": 99})
r(phase="derive", contains=["Instruction: Search the chats for", NONE], excludes=["Feedback:"], response={"action": "click", "ui_index": 4})
r(phase="derive", contains=["Instruction: Toggle the search bar", "Feedback:\n- You have looped"], response={"done": True})
r(phase="derive", contains=["Instruction: Toggle the search bar"], response={"action": "click", "ui_index": 3})
write("feedback.rules.json", rules + telegram + contacts)
